#pragma once

#include <string>

#include "kdc/embedding.hpp"
#include "kdc/features.hpp"

namespace kdc {

struct FitReport {
  double max_normal_eq_residual = 0.0;
  double decoder_residual = 0.0;
  double worst_condition = 0.0;  // over the regularized covariances
  long long sample_count = 0;
  double lambda_configured = 0.0;

  nlohmann::json to_json() const;
  static FitReport from_json(const nlohmann::json& j);
};

// A fitted model plus everything needed to run it on raw observations.
struct ModelArtifact {
  EmbeddingModel model;
  FeatureMaps maps;
  Decoder decoder;
  FitReport report;
};

// Directory layout: model.json (manifest: form, dims, lambdas, potential,
// graph, feature specs, block index, checksum) and blocks.bin (row-major
// float64, little-endian, in index order).
void save_model(const std::string& dir, const ModelArtifact& artifact);
ModelArtifact load_model(const std::string& dir);

// Checksum of the serialized block payload.
std::uint64_t model_checksum(const ModelArtifact& artifact);

}  // namespace kdc
