#include "kdc/serialize.hpp"

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "kdc/errors.hpp"
#include "kdc/io_util.hpp"

namespace kdc {

using nlohmann::json;

json FitReport::to_json() const {
  return {{"max_normal_eq_residual", max_normal_eq_residual},
          {"decoder_residual", decoder_residual},
          {"worst_condition", worst_condition},
          {"sample_count", sample_count},
          {"lambda_configured", lambda_configured}};
}

FitReport FitReport::from_json(const json& j) {
  FitReport r;
  r.max_normal_eq_residual = j.value("max_normal_eq_residual", 0.0);
  r.decoder_residual = j.value("decoder_residual", 0.0);
  r.worst_condition = j.value("worst_condition", 0.0);
  r.sample_count = j.value("sample_count", 0LL);
  r.lambda_configured = j.value("lambda_configured", 0.0);
  return r;
}

namespace {

struct BlockWriter {
  std::string bytes;
  json index = json::array();

  void add(const std::string& name, const Eigen::MatrixXd& m) {
    json entry = {{"name", name},
                  {"rows", m.rows()},
                  {"cols", m.cols()},
                  {"offset", bytes.size()}};
    index.push_back(entry);
    // row-major doubles
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        double v = m(r, c);
        char buf[sizeof(double)];
        std::memcpy(buf, &v, sizeof(double));
        bytes.append(buf, sizeof(double));
      }
  }
};

struct BlockReader {
  std::string bytes;
  const json* index = nullptr;
  std::size_t cursor = 0;

  Eigen::MatrixXd next(const std::string& expect_name) {
    if (cursor >= index->size()) throw IoError("model block index exhausted");
    const json& entry = (*index)[cursor++];
    if (entry.at("name").get<std::string>() != expect_name)
      throw IoError("model block order mismatch: wanted " + expect_name);
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const auto offset = entry.at("offset").get<std::size_t>();
    if (offset + sizeof(double) * rows * cols > bytes.size())
      throw IoError("model blocks truncated");
    Eigen::MatrixXd m(rows, cols);
    const char* p = bytes.data() + offset;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        double v;
        std::memcpy(&v, p, sizeof(double));
        p += sizeof(double);
        m(r, c) = v;
      }
    return m;
  }
};

void collect_blocks(const ModelArtifact& a, BlockWriter& w) {
  const EmbeddingModel& m = a.model;
  const Graph& g = m.graph;
  switch (m.form) {
    case EmbedForm::Dense:
      for (int i = 0; i < g.size(); ++i)
        for (std::size_t k = 0; k < m.h_blocks[i].size(); ++k)
          w.add("h_" + std::to_string(i) + "_" + std::to_string(k),
                m.h_blocks[i][k]);
      break;
    case EmbedForm::Hom:
      for (int j = 0; j < g.size(); ++j)
        w.add("hsrc_" + std::to_string(j), m.h_src[j]);
      break;
    case EmbedForm::HomMean:
      w.add("hshared", m.h_shared);
      break;
    case EmbedForm::Tensor:
      for (int i = 0; i < g.size(); ++i)
        for (std::size_t k = 0; k < m.t_blocks[i].size(); ++k)
          w.add("t_" + std::to_string(i) + "_" + std::to_string(k),
                m.t_blocks[i][k]);
      break;
  }
  if (m.form != EmbedForm::Tensor)
    for (int i = 0; i < g.size(); ++i)
      for (std::size_t k = 0; k < m.a_blocks[i].size(); ++k)
        w.add("a_" + std::to_string(i) + "_" + std::to_string(k),
              m.a_blocks[i][k]);
  w.add("decoder", a.decoder.D);
}

json model_manifest(const ModelArtifact& a, const json& block_index,
                    std::uint64_t checksum) {
  const EmbeddingModel& m = a.model;
  json edges = json::array();
  for (auto [x, y] : m.graph.edges()) edges.push_back({x, y});
  json j = {
      {"format", "kdc-model-v1"},
      {"form", to_string(m.form)},
      {"nodes", m.graph.size()},
      {"edges", edges},
      {"d", m.d},
      {"d_a", m.d_a},
      {"lambda_h_used", m.lambda_h_used},
      {"lambda_a_used", m.lambda_a_used},
      {"lambda_z_used", m.lambda_z_used},
      {"lambda_pool_used", m.lambda_pool_used},
      {"feature_map", a.maps.obs.to_json()},
      {"action_projection", a.maps.action.to_json()},
      {"decoder_rho", a.decoder.rho},
      {"report", a.report.to_json()},
      {"blocks", block_index},
      {"checksum", checksum},
  };
  if (m.form == EmbedForm::HomMean) j["potential"] = m.potential.to_json();
  return j;
}

}  // namespace

void save_model(const std::string& dir, const ModelArtifact& artifact) {
  ensure_directory(dir);
  BlockWriter w;
  collect_blocks(artifact, w);
  const std::uint64_t checksum = fnv1a64(w.bytes.data(), w.bytes.size());
  write_text_file(dir + "/blocks.bin", w.bytes);
  write_text_file(dir + "/model.json",
                  model_manifest(artifact, w.index, checksum).dump(2) + "\n");
}

ModelArtifact load_model(const std::string& dir) {
  json manifest;
  try {
    manifest = json::parse(read_text_file(dir + "/model.json"));
  } catch (const json::exception& e) {
    throw IoError(std::string("bad model manifest: ") + e.what());
  }
  ModelArtifact a;
  EmbeddingModel& m = a.model;
  m.form = embed_form_from_string(manifest.at("form").get<std::string>());
  const int n = manifest.at("nodes").get<int>();
  std::vector<std::pair<int, int>> edges;
  for (const auto& e : manifest.at("edges"))
    edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  m.graph = Graph(n, edges);
  m.d = manifest.at("d").get<int>();
  m.d_a = manifest.at("d_a").get<int>();
  m.lambda_h_used = manifest.at("lambda_h_used").get<std::vector<double>>();
  m.lambda_a_used = manifest.at("lambda_a_used").get<std::vector<double>>();
  m.lambda_z_used = manifest.at("lambda_z_used").get<std::vector<double>>();
  m.lambda_pool_used = manifest.at("lambda_pool_used").get<double>();
  if (manifest.contains("potential"))
    m.potential = GibbsPotential::from_json(manifest["potential"]);
  a.maps.obs = FeatureMap::from_json(manifest.at("feature_map"));
  a.maps.action = ActionProjection::from_json(manifest.at("action_projection"));
  a.report = FitReport::from_json(manifest.at("report"));

  BlockReader r;
  r.bytes = read_text_file(dir + "/blocks.bin");
  r.index = &manifest.at("blocks");
  const std::uint64_t checksum = fnv1a64(r.bytes.data(), r.bytes.size());
  if (checksum != manifest.at("checksum").get<std::uint64_t>())
    throw IoError("model block checksum mismatch in " + dir);

  switch (m.form) {
    case EmbedForm::Dense:
      m.h_blocks.resize(n);
      for (int i = 0; i < n; ++i) {
        const auto& nbrs = m.graph.inclusive_neighborhood(i);
        m.h_blocks[i].resize(nbrs.size());
        for (std::size_t k = 0; k < nbrs.size(); ++k)
          m.h_blocks[i][k] =
              r.next("h_" + std::to_string(i) + "_" + std::to_string(k));
      }
      break;
    case EmbedForm::Hom:
      m.h_src.resize(n);
      for (int j = 0; j < n; ++j) m.h_src[j] = r.next("hsrc_" + std::to_string(j));
      break;
    case EmbedForm::HomMean:
      m.h_shared = r.next("hshared");
      break;
    case EmbedForm::Tensor:
      m.t_blocks.resize(n);
      for (int i = 0; i < n; ++i) {
        const auto& nbrs = m.graph.inclusive_neighborhood(i);
        m.t_blocks[i].resize(nbrs.size());
        for (std::size_t k = 0; k < nbrs.size(); ++k)
          m.t_blocks[i][k] =
              r.next("t_" + std::to_string(i) + "_" + std::to_string(k));
      }
      break;
  }
  if (m.form != EmbedForm::Tensor) {
    m.a_blocks.resize(n);
    for (int i = 0; i < n; ++i) {
      const auto& nbrs = m.graph.inclusive_neighborhood(i);
      m.a_blocks[i].resize(nbrs.size());
      for (std::size_t k = 0; k < nbrs.size(); ++k)
        m.a_blocks[i][k] =
            r.next("a_" + std::to_string(i) + "_" + std::to_string(k));
    }
  }
  a.decoder.D = r.next("decoder");
  a.decoder.rho = manifest.at("decoder_rho").get<double>();
  return a;
}

std::uint64_t model_checksum(const ModelArtifact& artifact) {
  BlockWriter w;
  collect_blocks(artifact, w);
  return fnv1a64(w.bytes.data(), w.bytes.size());
}

}  // namespace kdc
