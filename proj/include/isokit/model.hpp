#pragma once

// Finite-state continuous-time Markov chains with killing.
//
// A model carries a reference measure m on the states, off-diagonal jump
// rates and per-state killing rates. The generator is
//   Q(x,y) = jump_rate(x,y),  x != y
//   Q(x,x) = -sum_{y != x} jump_rate(x,y) - kill_rate(x)
// and the transition density with respect to m is p_t = exp(tQ) diag(1/m).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "isokit/error.hpp"

namespace isokit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr const char* kModelSchema = "isokit-model/1";

/// Detailed-balance tolerance for models declared symmetric.
inline constexpr double kSymmetryTolerance = 1e-12;

/// Spectral-abscissa threshold separating transient from recurrent models.
inline constexpr double kTransienceThreshold = 1e-10;

/// Largest real part of the eigenvalues of a square matrix.
inline double spectral_abscissa(const Matrix& a) {
  if (a.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

/// The generator Q of a chain. Row sums are <= 0 and off-diagonals >= 0.
class Generator {
 public:
  Generator() = default;
  explicit Generator(Matrix q) : q_(std::move(q)) {}

  const Matrix& matrix() const noexcept { return q_; }
  double operator()(std::size_t x, std::size_t y) const { return q_(x, y); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(q_.rows()); }
  double spectral_abscissa() const { return isokit::spectral_abscissa(q_); }

 private:
  Matrix q_;
};

/// Result of the detailed-balance check m(x)Q(x,y) = m(y)Q(y,x).
struct SymmetryReport {
  double max_deviation = 0.0;
  bool pass = true;
};

class ChainModel {
 public:
  /// Builds and validates a model. `jump` holds jump_rate(x,y) off the
  /// diagonal; its diagonal is ignored. Throws ValidationError on any
  /// invariant violation.
  ChainModel(std::vector<std::string> states, Vector m, Matrix jump, Vector kill,
             bool symmetric, bool recurrent)
      : states_(std::move(states)),
        m_(std::move(m)),
        jump_(std::move(jump)),
        kill_(std::move(kill)),
        symmetric_(symmetric),
        recurrent_(recurrent) {
    validate();
  }

  std::size_t size() const noexcept { return states_.size(); }
  const std::vector<std::string>& states() const noexcept { return states_; }
  const std::string& state_name(std::size_t i) const { return states_.at(i); }

  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UnknownState("unknown state '" + name + "'");
    return it->second;
  }

  const Vector& mass() const noexcept { return m_; }
  const Matrix& jump_rates() const noexcept { return jump_; }
  const Vector& kill_rates() const noexcept { return kill_; }
  const Generator& generator() const noexcept { return generator_; }

  bool symmetric() const noexcept { return symmetric_; }
  bool recurrent() const noexcept { return recurrent_; }
  bool transient() const noexcept { return !recurrent_; }

  /// Total exit rate -Q(x,x).
  double total_rate(std::size_t x) const { return -generator_(x, x); }

 private:
  void validate();

  std::vector<std::string> states_;
  std::map<std::string, std::size_t> index_;
  Vector m_;
  Matrix jump_;
  Vector kill_;
  Generator generator_;
  bool symmetric_;
  bool recurrent_;
};

inline SymmetryReport check_symmetry(const Vector& m, const Matrix& q) {
  SymmetryReport r;
  const auto n = q.rows();
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = x + 1; y < n; ++y)
      r.max_deviation = std::max(r.max_deviation, std::abs(m(x) * q(x, y) - m(y) * q(y, x)));
  r.pass = r.max_deviation <= kSymmetryTolerance;
  return r;
}

inline SymmetryReport check_symmetry(const ChainModel& model) {
  return check_symmetry(model.mass(), model.generator().matrix());
}

inline void ChainModel::validate() {
  const auto n = states_.size();
  if (n == 0) throw ValidationError("model has no states");
  for (std::size_t i = 0; i < n; ++i) {
    if (!index_.emplace(states_[i], i).second)
      throw ValidationError("duplicate state '" + states_[i] + "'");
  }
  const auto sn = static_cast<Eigen::Index>(n);
  if (m_.size() != sn || kill_.size() != sn || jump_.rows() != sn || jump_.cols() != sn)
    throw ValidationError("model arrays do not match the number of states");

  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(m_(i)) || m_(i) <= 0.0)
      throw ValidationError("mass of state '" + states_[i] + "' must be positive");
    if (!std::isfinite(kill_(i)) || kill_(i) < 0.0)
      throw ValidationError("kill rate of state '" + states_[i] + "' must be nonnegative");
    jump_(i, i) = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(jump_(i, j)) || jump_(i, j) < 0.0)
        throw ValidationError("jump rate " + states_[i] + "->" + states_[j] +
                              " must be nonnegative");
    }
  }

  Matrix q = jump_;
  for (std::size_t i = 0; i < n; ++i) q(i, i) = -jump_.row(i).sum() - kill_(i);
  generator_ = Generator(std::move(q));

  if (symmetric_) {
    const auto rep = check_symmetry(m_, generator_.matrix());
    if (!rep.pass) {
      std::ostringstream os;
      os << "model declared symmetric but detailed balance fails (max deviation "
         << rep.max_deviation << ")";
      throw ValidationError(os.str());
    }
  }

  const double abscissa = generator_.spectral_abscissa();
  if (recurrent_) {
    if (std::abs(abscissa) > kTransienceThreshold)
      throw ValidationError("model flagged recurrent but the generator's spectral abscissa is " +
                            std::to_string(abscissa));
  } else if (!(abscissa < -kTransienceThreshold)) {
    throw ValidationError(
        "model is not transient (spectral abscissa " + std::to_string(abscissa) +
        "); set \"recurrent\": true for conservative chains");
  }
}

// ---------------------------------------------------------------------------
// JSON model files
// ---------------------------------------------------------------------------

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ParseError("unknown key '" + key + "' in " + where);
  }
}

inline double number_at(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + " must be a number");
  return v.get<double>();
}

}  // namespace detail

inline ChainModel parse_model(const nlohmann::json& doc) {
  using nlohmann::json;
  if (!doc.is_object()) throw ParseError("model must be a JSON object");
  detail::reject_unknown_keys(
      doc, {"schema", "states", "m", "jump_rates", "kill_rates", "symmetric", "recurrent"}, "model");

  if (doc.contains("schema") && doc.at("schema") != kModelSchema)
    throw ParseError("unsupported model schema");

  if (!doc.contains("states") || !doc.at("states").is_array())
    throw ParseError("model needs a \"states\" array");
  std::vector<std::string> states;
  for (const auto& s : doc.at("states")) {
    if (!s.is_string()) throw ParseError("state identifiers must be strings");
    states.push_back(s.get<std::string>());
  }
  const auto n = static_cast<Eigen::Index>(states.size());
  std::map<std::string, Eigen::Index> idx;
  for (Eigen::Index i = 0; i < n; ++i) idx.emplace(states[i], i);
  auto lookup = [&](const std::string& name, const std::string& where) {
    auto it = idx.find(name);
    if (it == idx.end()) throw ParseError("unknown state '" + name + "' in " + where);
    return it->second;
  };

  if (!doc.contains("m") || !doc.at("m").is_object()) throw ParseError("model needs an \"m\" object");
  Vector m = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
  for (const auto& [name, w] : doc.at("m").items()) m(lookup(name, "m")) = detail::number_at(w, "m." + name);
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::isnan(m(i))) throw ParseError("missing mass for state '" + states[i] + "'");

  Matrix jump = Matrix::Zero(n, n);
  if (!doc.contains("jump_rates") || !doc.at("jump_rates").is_array())
    throw ParseError("model needs a \"jump_rates\" array");
  std::set<std::pair<Eigen::Index, Eigen::Index>> seen;
  for (const auto& e : doc.at("jump_rates")) {
    if (!e.is_object()) throw ParseError("jump_rates entries must be objects");
    detail::reject_unknown_keys(e, {"from", "to", "rate"}, "jump_rates entry");
    if (!e.contains("from") || !e.contains("to") || !e.contains("rate") || !e.at("from").is_string() ||
        !e.at("to").is_string())
      throw ParseError("jump_rates entries need string \"from\", \"to\" and numeric \"rate\"");
    const auto from = lookup(e.at("from").get<std::string>(), "jump_rates");
    const auto to = lookup(e.at("to").get<std::string>(), "jump_rates");
    if (from == to) throw ParseError("jump_rates entry from a state to itself");
    if (!seen.emplace(from, to).second) throw ParseError("duplicate jump_rates entry");
    jump(from, to) = detail::number_at(e.at("rate"), "jump_rates.rate");
  }

  Vector kill = Vector::Zero(n);
  if (doc.contains("kill_rates")) {
    if (!doc.at("kill_rates").is_object()) throw ParseError("\"kill_rates\" must be an object");
    for (const auto& [name, r] : doc.at("kill_rates").items())
      kill(lookup(name, "kill_rates")) = detail::number_at(r, "kill_rates." + name);
  }

  auto flag = [&](const char* key) {
    if (!doc.contains(key)) return false;
    if (!doc.at(key).is_boolean()) throw ParseError(std::string("\"") + key + "\" must be a boolean");
    return doc.at(key).get<bool>();
  };
  const bool symmetric = flag("symmetric");
  const bool recurrent = flag("recurrent");

  return ChainModel(std::move(states), std::move(m), std::move(jump), std::move(kill), symmetric,
                    recurrent);
}

inline ChainModel parse_model(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed model JSON: ") + e.what());
  }
  return parse_model(doc);
}

inline ChainModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

inline nlohmann::json to_json(const ChainModel& model) {
  using nlohmann::json;
  json doc;
  doc["schema"] = kModelSchema;
  doc["states"] = model.states();
  json m = json::object();
  json kill = json::object();
  json jumps = json::array();
  for (std::size_t i = 0; i < model.size(); ++i) {
    m[model.state_name(i)] = model.mass()(i);
    kill[model.state_name(i)] = model.kill_rates()(i);
    for (std::size_t j = 0; j < model.size(); ++j) {
      if (i != j && model.jump_rates()(i, j) != 0.0)
        jumps.push_back({{"from", model.state_name(i)}, {"to", model.state_name(j)},
                         {"rate", model.jump_rates()(i, j)}});
    }
  }
  doc["m"] = std::move(m);
  doc["jump_rates"] = std::move(jumps);
  doc["kill_rates"] = std::move(kill);
  doc["symmetric"] = model.symmetric();
  doc["recurrent"] = model.recurrent();
  return doc;
}

inline void save_model(const ChainModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write model file '" + path + "'");
  out << to_json(model).dump(2) << '\n';
}

}  // namespace isokit
