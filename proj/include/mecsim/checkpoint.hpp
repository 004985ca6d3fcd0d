#pragma once

// JSON tensor dumps of actor parameters: shapes plus row-major values.

#include <string>

#include <json.hpp>

#include "mecsim/error.hpp"
#include "mecsim/gcn.hpp"
#include "mecsim/mlp.hpp"
#include "mecsim/scenario.hpp"

namespace mecsim {

namespace detail {

template <typename M>
nlohmann::json dump_tensor(const Eigen::MatrixBase<M>& m) {
  nlohmann::json values = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) values.push_back(m(i, j));
  return {{"shape", {m.rows(), m.cols()}}, {"values", values}};
}

template <typename M>
void load_tensor(const nlohmann::json& j, const std::string& name, Eigen::MatrixBase<M>& m) {
  const auto& t = j.at(name);
  const auto rows = t.at("shape").at(0).get<Eigen::Index>();
  const auto cols = t.at("shape").at(1).get<Eigen::Index>();
  if (rows != m.rows() || cols != m.cols()) {
    throw ConfigError("checkpoint: tensor '" + name + "' has shape [" + std::to_string(rows) +
                      ", " + std::to_string(cols) + "], expected [" +
                      std::to_string(m.rows()) + ", " + std::to_string(m.cols()) + "]");
  }
  const auto& v = t.at("values");
  if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
    throw ConfigError("checkpoint: tensor '" + name + "' has the wrong number of values");
  }
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = v[k++].get<double>();
}

}  // namespace detail

inline nlohmann::json gcn_to_json(const GcnParams& p) {
  nlohmann::json t;
  t["w1"] = detail::dump_tensor(p.w1);
  t["b1"] = detail::dump_tensor(p.b1);
  t["w2"] = detail::dump_tensor(p.w2);
  t["b2"] = detail::dump_tensor(p.b2);
  t["m1_src"] = detail::dump_tensor(p.m1_src);
  t["m1_dst"] = detail::dump_tensor(p.m1_dst);
  t["c1"] = detail::dump_tensor(p.c1);
  t["m2"] = detail::dump_tensor(p.m2);
  Eigen::Matrix<double, 1, 1> c2;
  c2(0, 0) = p.c2;
  t["c2"] = detail::dump_tensor(c2);
  return {{"format", "mecsim-actor"},
          {"version", 1},
          {"kind", "gcn"},
          {"shape",
           {{"in_dim", p.shape.in_dim},
            {"hidden1", p.shape.hidden1},
            {"hidden2", p.shape.hidden2},
            {"mlp_hidden", p.shape.mlp_hidden}}},
          {"tensors", t}};
}

inline GcnParams gcn_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "mecsim-actor" || j.at("version") != 1 || j.at("kind") != "gcn") {
      throw ConfigError("checkpoint: not a version-1 GCN actor checkpoint");
    }
    GcnShape s;
    const auto& sj = j.at("shape");
    s.in_dim = sj.at("in_dim");
    s.hidden1 = sj.at("hidden1");
    s.hidden2 = sj.at("hidden2");
    s.mlp_hidden = sj.at("mlp_hidden");
    GcnParams p = GcnParams::zeros(s);
    const auto& t = j.at("tensors");
    detail::load_tensor(t, "w1", p.w1);
    detail::load_tensor(t, "b1", p.b1);
    detail::load_tensor(t, "w2", p.w2);
    detail::load_tensor(t, "b2", p.b2);
    detail::load_tensor(t, "m1_src", p.m1_src);
    detail::load_tensor(t, "m1_dst", p.m1_dst);
    detail::load_tensor(t, "c1", p.c1);
    detail::load_tensor(t, "m2", p.m2);
    Eigen::Matrix<double, 1, 1> c2;
    detail::load_tensor(t, "c2", c2);
    p.c2 = c2(0, 0);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

inline nlohmann::json mlp_to_json(const MlpParams& p) {
  nlohmann::json t;
  t["w1"] = detail::dump_tensor(p.w1);
  t["b1"] = detail::dump_tensor(p.b1);
  t["w2"] = detail::dump_tensor(p.w2);
  t["b2"] = detail::dump_tensor(p.b2);
  return {{"format", "mecsim-actor"}, {"version", 1}, {"kind", "mlp"}, {"tensors", t}};
}

inline MlpParams mlp_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "mecsim-actor" || j.at("version") != 1 || j.at("kind") != "mlp") {
      throw ConfigError("checkpoint: not a version-1 MLP actor checkpoint");
    }
    const auto& t = j.at("tensors");
    const auto in = t.at("w1").at("shape").at(0).get<Eigen::Index>();
    const auto hid = t.at("w1").at("shape").at(1).get<Eigen::Index>();
    const auto out = t.at("w2").at("shape").at(1).get<Eigen::Index>();
    MlpParams p = MlpParams::zeros(in, hid, out);
    detail::load_tensor(t, "w1", p.w1);
    detail::load_tensor(t, "b1", p.b1);
    detail::load_tensor(t, "w2", p.w2);
    detail::load_tensor(t, "b2", p.b2);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace mecsim
