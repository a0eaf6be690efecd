// isokit command-line front end: verify, kernel, sample.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isokit/isokit.hpp"

namespace {

using namespace isokit;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct LoadedModel {
  ChainModel model;
  std::string hash;
};

LoadedModel read_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  return {parse_model(text), "fnv1a:" + hex64(fnv1a64(text))};
}

std::optional<std::size_t> state_flag(const ChainModel& model, const std::string& name) {
  if (name.empty()) return std::nullopt;
  return model.index_of(name);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(v))
    throw PreconditionError("invalid number '" + s + "' for " + what);
  return v;
}

/// Writes to `path`, or to stdout when the path is empty or "-".
template <class F>
void emit(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path + "'");
  write(out);
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string model;
  std::string identity = "all";
  std::string x, y, z0, x0;
  int order = 3;
  std::optional<double> t, s, alpha;
  std::vector<double> nu;
  double delta = 0.2;
  std::size_t trials = 0;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string json_out, csv_out;
  bool timing = false;
  std::optional<double> tol_abs, tol_rel;
};

int cmd_verify(const VerifyArgs& a) {
  const auto loaded = read_model(a.model);
  const ChainModel& model = loaded.model;
  RunConfig cfg;
  cfg.identity = a.identity;
  cfg.x = state_flag(model, a.x);
  cfg.y = state_flag(model, a.y);
  cfg.z0 = state_flag(model, a.z0);
  cfg.x0 = state_flag(model, a.x0);
  cfg.order = a.order;
  cfg.t = a.t;
  cfg.s = a.s;
  cfg.alpha = a.alpha;
  cfg.delta = a.delta;
  cfg.trials = a.trials;
  if (!a.nu.empty()) {
    if (a.nu.size() != model.size()) throw PreconditionError("--nu needs one weight per state");
    cfg.nu = Eigen::Map<const Vector>(a.nu.data(), static_cast<Eigen::Index>(a.nu.size()));
  }
  const double eps = std::numeric_limits<double>::epsilon();
  if (a.tol_abs) {
    if (!(*a.tol_abs >= eps)) throw PreconditionError("--tol-abs must be at least machine epsilon");
    cfg.tol.abs = *a.tol_abs;
  }
  if (a.tol_rel) {
    if (!(*a.tol_rel >= eps)) throw PreconditionError("--tol-rel must be at least machine epsilon");
    cfg.tol.rel = *a.tol_rel;
  }
  const auto ids = a.identity == "all" ? applicable_identities(model) : std::vector<std::string>{a.identity};
  const bool stochastic = a.trials > 0 || std::find(ids.begin(), ids.end(), "poisson") != ids.end();
  if (stochastic && !a.seed) throw PreconditionError("--seed is required for runs with Monte Carlo checks");
  cfg.seed = a.seed.value_or(0);

  const auto jobs = plan_verification(model, cfg);
  const auto reports = run_jobs(jobs, a.threads);
  const ReportMeta meta{cfg.seed, loaded.hash};

  if (!a.json_out.empty() || a.csv_out.empty())
    emit(a.json_out, [&](std::ostream& os) { os << reports_to_json(reports, meta, a.timing).dump(2) << '\n'; });
  if (!a.csv_out.empty()) emit(a.csv_out, [&](std::ostream& os) { write_reports_csv(os, reports, meta); });

  std::size_t failed = 0;
  for (const auto& r : reports) {
    if (r.pass) continue;
    ++failed;
    std::cerr << "FAIL " << r.identity << ' ' << r.params.dump() << " lhs=" << r.lhs << " rhs=" << r.rhs
              << " abs_err=" << r.abs_err << (r.note.empty() ? "" : " (" + r.note + ")") << '\n';
  }
  std::cerr << reports.size() - failed << '/' << reports.size() << " reports passed\n";
  return failed == 0 ? kExitPass : kExitFail;
}

// ---------------------------------------------------------------------------

struct KernelArgs {
  std::string model;
  std::string kind;
  std::string out;
};

Kernel build_kernel(const ChainModel& model, const std::string& kind) {
  const auto parts = split(kind, ':');
  const auto& head = parts.at(0);
  if (head == "potential" && parts.size() == 1) return potential(model);
  if (head == "alpha" && parts.size() == 2) return alpha_potential(model, parse_number(parts[1], "alpha"));
  if (head == "killed" && parts.size() == 2) return killed_potential(model, model.index_of(parts[1]));
  if (head == "tau" && parts.size() == 3)
    return tau_potential(killed_potential(model, model.index_of(parts[1])), parse_number(parts[2], "alpha"));
  throw PreconditionError("unknown kernel kind '" + kind + "' (alpha:A, potential, killed:Z0, tau:Z0:A)");
}

int cmd_kernel(const KernelArgs& a) {
  if (a.kind.empty()) throw PreconditionError("--kind is empty");
  const auto loaded = read_model(a.model);
  const Kernel k = build_kernel(loaded.model, a.kind);
  emit(a.out, [&](std::ostream& os) {
    write_kernel_csv(os, k);
    os << "# isokit " << kVersion << " seed=none model=" << loaded.hash << '\n';
  });
  return kExitPass;
}

// ---------------------------------------------------------------------------

struct SampleArgs {
  std::string model;
  std::string sampler;
  std::string x0, x, y, z0;
  double t = 1.0;
  double alpha = 0.5;
  std::size_t trials = 1;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_sample(const SampleArgs& a) {
  if (!a.seed) throw PreconditionError("--seed is required for sampling");
  if (a.trials == 0) throw PreconditionError("--trials must be positive");
  const auto loaded = read_model(a.model);
  const ChainModel& model = loaded.model;
  const auto n = model.size();
  Rng rng = RngStream{*a.seed, 0}.engine();

  auto need = [&](const std::string& name, const char* flag) {
    if (name.empty()) throw PreconditionError(std::string("--") + flag + " is required for this sampler");
    return model.index_of(name);
  };

  // Each sampler yields rows of n field values, plus a lifetime when it has one.
  std::vector<Vector> rows;
  std::vector<double> lifetimes;
  rows.reserve(a.trials);
  if (a.sampler == "path") {
    const auto x0 = need(a.x0, "x0");
    const PathSampler s(model);
    for (std::size_t i = 0; i < a.trials; ++i) {
      auto smp = s.sample(x0, rng, false);
      rows.push_back(smp.field.values);
      lifetimes.push_back(smp.path.lifetime);
    }
  } else if (a.sampler == "bridge") {
    const auto x = need(a.x, "x");
    const BridgeSampler s(model, need(a.y, "y"));
    for (std::size_t i = 0; i < a.trials; ++i) rows.push_back(s.sample(x, rng).values);
  } else if (a.sampler == "tau-field") {
    const InverseLtSampler s(model, need(a.z0, "z0"));
    for (std::size_t i = 0; i < a.trials; ++i) {
      auto smp = s.sample(a.t, rng);
      rows.push_back(smp.field.values);
      lifetimes.push_back(smp.lifetime);
    }
  } else if (a.sampler == "gaussian") {
    if (!model.symmetric()) throw PreconditionError("gaussian sampler needs a symmetric model");
    Matrix c;
    if (model.recurrent())
      c = killed_potential(model, need(a.z0, "z0")).entries;
    else
      c = potential(model).entries;
    const GaussianSampler s(c);
    for (std::size_t i = 0; i < a.trials; ++i) rows.push_back(s.draw(rng));
  } else if (a.sampler == "soup-halfint") {
    if (!model.symmetric()) throw PreconditionError("soup-halfint sampler needs a symmetric model");
    const double k = 2.0 * a.alpha;
    if (!(k >= 1.0) || k != std::floor(k)) throw PreconditionError("--alpha must be a positive half-integer");
    const HalfIntSoupSampler s(potential(model).entries, static_cast<int>(k));
    for (std::size_t i = 0; i < a.trials; ++i) rows.push_back(s.draw(rng).values);
  } else {
    throw PreconditionError("unknown sampler '" + a.sampler + "'");
  }

  emit(a.out, [&](std::ostream& os) {
    os.precision(17);
    os << "trial";
    for (std::size_t j = 0; j < n; ++j) os << ',' << model.state_name(j);
    if (!lifetimes.empty()) os << ",lifetime";
    os << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
      os << i;
      for (Eigen::Index j = 0; j < rows[i].size(); ++j) os << ',' << rows[i](j);
      if (!lifetimes.empty()) os << ',' << lifetimes[i];
      os << '\n';
    }
    os << footer_line(ReportMeta{*a.seed, loaded.hash}) << '\n';
  });
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local-time and Gaussian field identities on finite Markov chains"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "Check isomorphism identities on a model");
  verify->add_option("--model", va.model, "Model JSON file")->required();
  verify->add_option("--identity", va.identity, "dynkin|eisenbaum|rayknight|soup|permanental|interlacement|poisson|all");
  verify->add_option("--x", va.x, "State x");
  verify->add_option("--y", va.y, "State y");
  verify->add_option("--z0", va.z0, "Distinguished state (rayknight)");
  verify->add_option("--x0", va.x0, "Root state (soup)");
  verify->add_option("--order", va.order, "Maximum moment order");
  verify->add_option("--t", va.t, "Level t");
  verify->add_option("--s", va.s, "Shift s (eisenbaum)");
  verify->add_option("--alpha", va.alpha, "Soup intensity");
  verify->add_option("--nu", va.nu, "Interlacement measure, one weight per state")->delimiter(',');
  verify->add_option("--delta", va.delta, "Interlacement load scale");
  verify->add_option("--trials", va.trials, "Monte Carlo trials (0 disables)");
  verify->add_option("--seed", va.seed, "RNG seed");
  verify->add_option("--threads", va.threads, "Worker threads")->check(CLI::PositiveNumber);
  verify->add_option("--json", va.json_out, "JSON report path (default stdout)");
  verify->add_option("--csv", va.csv_out, "CSV summary path");
  verify->add_flag("--timing", va.timing, "Include runtimes in the JSON report");
  verify->add_option("--tol-abs", va.tol_abs, "Absolute tolerance for exact checks");
  verify->add_option("--tol-rel", va.tol_rel, "Relative tolerance for exact checks");

  KernelArgs ka;
  auto* kernel = app.add_subcommand("kernel", "Print a potential kernel as CSV");
  kernel->add_option("--model", ka.model, "Model JSON file")->required();
  kernel->add_option("--kind", ka.kind, "alpha:A | potential | killed:Z0 | tau:Z0:A")->required();
  kernel->add_option("--out", ka.out, "Output path (default stdout)");

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Draw seeded samples of local-time or Gaussian fields");
  sample->add_option("--model", sa.model, "Model JSON file")->required();
  sample->add_option("--sampler", sa.sampler, "path|bridge|tau-field|gaussian|soup-halfint")->required();
  sample->add_option("--x0", sa.x0, "Start state (path)");
  sample->add_option("--x", sa.x, "Start state (bridge)");
  sample->add_option("--y", sa.y, "End state (bridge)");
  sample->add_option("--z0", sa.z0, "Distinguished state (tau-field, gaussian on recurrent models)");
  sample->add_option("--t", sa.t, "Local-time level (tau-field)");
  sample->add_option("--alpha", sa.alpha, "Soup intensity, a half-integer (soup-halfint)");
  sample->add_option("--trials", sa.trials, "Number of rows");
  sample->add_option("--seed", sa.seed, "RNG seed");
  sample->add_option("--out", sa.out, "Output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*verify) return cmd_verify(va);
    if (*kernel) return cmd_kernel(ka);
    if (*sample) return cmd_sample(sa);
  } catch (const Error& e) {
    std::cerr << "isokit: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
