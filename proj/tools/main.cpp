// levylab: heavy-tailed gradient-noise laboratory. Every subcommand is
// deterministic given its flags: identical invocations produce byte-identical
// output files.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "levylab/errors.hpp"
#include "levylab/estimate.hpp"
#include "levylab/gradnoise.hpp"
#include "levylab/meta.hpp"
#include "levylab/numerics.hpp"
#include "levylab/sde.hpp"
#include "levylab/stable.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace levylab;

constexpr const char* kVersion = "0.1.0";

// Exit codes, also listed in --help.
enum ExitCode {
  kOk = 0,
  kUsage = 64,
  kParamError = 65,
  kDataError = 66,
  kFormatError = 67,
  kBlowupError = 68,
  kInternal = 70,
};

using ParamList = std::vector<std::pair<std::string, std::string>>;

json provenance_json(const std::string& subcommand, const ParamList& params,
                     std::uint64_t seed) {
  json p;
  p["subcommand"] = subcommand;
  json flags;
  for (const auto& [k, v] : params) flags[k] = v;
  p["params"] = flags;
  p["seed"] = seed;
  p["version"] = kVersion;
  return p;
}

std::string provenance_line(const std::string& subcommand, const ParamList& params,
                            std::uint64_t seed) {
  std::string line = "# levylab v" + std::string(kVersion) + " " + subcommand;
  for (const auto& [k, v] : params) line += " " + k + "=" + v;
  line += " seed=" + std::to_string(seed);
  return line + "\n";
}

// Writes via a temporary file plus rename so a failure never leaves a
// partial output behind. Empty path or "-" writes to stdout.
void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::fwrite(content.data(), 1, content.size(), stdout);
    return;
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("cannot write " + tmp);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename " + tmp + " to " + path + ": " + ec.message());
  }
}

std::vector<double> parse_real_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(field, &pos));
      if (pos != field.size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw ParamError(flag + ": cannot parse '" + field + "' as a real number");
    }
  }
  if (out.empty()) throw ParamError(flag + ": empty list");
  return out;
}

// "lo:hi:count" (inclusive, evenly spaced), or a comma list, or one value.
std::vector<double> parse_grid(const std::string& text, const std::string& flag) {
  const auto c1 = text.find(':');
  if (c1 == std::string::npos) return parse_real_list(text, flag);
  const auto c2 = text.find(':', c1 + 1);
  if (c2 == std::string::npos) throw ParamError(flag + ": range syntax is lo:hi:count");
  double lo, hi;
  long count;
  try {
    lo = std::stod(text.substr(0, c1));
    hi = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    count = std::stol(text.substr(c2 + 1));
  } catch (const std::exception&) {
    throw ParamError(flag + ": cannot parse range '" + text + "'");
  }
  if (count < 1) throw ParamError(flag + ": range count must be >= 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  if (count == 1) {
    out.push_back(lo);
  } else {
    for (long i = 0; i < count; ++i)
      out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return out;
}

sde::PotentialPtr parse_potential(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "quadratic") {
    const std::size_t dim = args.empty() ? 1 : static_cast<std::size_t>(std::stoul(args));
    return sde::make_quadratic(dim);
  }
  if (kind == "double-well") {
    if (args.empty())
      throw ParamError("--potential double-well needs m1,m2 (e.g. double-well:-1,2)");
    const auto m = parse_real_list(args, "--potential");
    if (m.size() != 2) throw ParamError("--potential double-well needs exactly m1,m2");
    return sde::make_double_well(m[0], m[1]);
  }
  if (kind == "product-valley") return sde::make_product_valley();
  throw ParamError("unknown potential '" + kind +
                   "' (use quadratic[:dim], double-well:m1,m2, product-valley)");
}

std::string bool_str(bool b) { return b ? "1" : "0"; }

struct CommonOut {
  std::string out_path;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

void add_common(CLI::App* sub, CommonOut& common, bool with_threads = true) {
  sub->add_option("--seed", common.seed, "RNG seed (64-bit unsigned)")->capture_default_str();
  sub->add_option("--out", common.out_path, "output file (default: stdout)");
  if (with_threads)
    sub->add_option("--threads", common.threads, "worker threads (0 = hardware)")
        ->envname("LEVYLAB_THREADS")
        ->capture_default_str();
  // Handled by expand_config_args before parsing; registered for --help only.
  sub->add_option("--config", "read key=value defaults from a file (flags win)");
}

struct UsageError {
  std::string message;
};

// Expands `--config FILE` into --key=value arguments for every key the
// command line does not already set, so explicit flags always win. The file
// is flat key=value, with '#' comments and blank lines allowed.
void expand_config_args(std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError{"--config needs a file argument"};
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return;
  for (const auto& a : args)
    if (a == "--config" || a.rfind("--config=", 0) == 0)
      throw UsageError{"--config may be given at most once"};

  std::ifstream in(path);
  if (!in) throw UsageError{"cannot open config file " + path};
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError{path + ": line " + std::to_string(line_no) + ": expected key=value"};
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw UsageError{path + ": line " + std::to_string(line_no) + ": empty key"};
    const std::string flag = "--" + key;
    bool given = false;
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
    if (!given) args.push_back(flag + "=" + value);
  }
}

void emit(const std::string& subcommand, const ParamList& params, const CommonOut& common,
          const std::string& body, std::chrono::steady_clock::time_point start) {
  write_output(common.out_path, provenance_line(subcommand, params, common.seed) + body);
  json record = provenance_json(subcommand, params, common.seed);
  record["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << record.dump() << "\n";
}

void emit_json(const std::string& subcommand, const ParamList& params, const CommonOut& common,
               json body, std::chrono::steady_clock::time_point start) {
  body["provenance"] = provenance_json(subcommand, params, common.seed);
  write_output(common.out_path, body.dump(2) + "\n");
  json record = provenance_json(subcommand, params, common.seed);
  record["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << record.dump() << "\n";
}

std::vector<double> read_reals_lines(std::istream& in, const std::string& name) {
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      std::size_t pos = 0;
      const double v = std::stod(line, &pos);
      while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
      if (pos != line.size()) throw std::invalid_argument("trailing junk");
      out.push_back(v);
    } catch (const std::exception&) {
      throw FormatError(name + ": line " + std::to_string(line_no) + ": cannot parse '" + line +
                        "' as a real number");
    }
  }
  return out;
}

std::string csv_trajectory(const sde::Trajectory& traj, const std::string& var) {
  std::string body = "t";
  const std::size_t dim = traj.states.empty() ? 0 : traj.states[0].size();
  for (std::size_t j = 0; j < dim; ++j) body += "," + var + std::to_string(j + 1);
  body += "\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    body += format_real(traj.times[i]);
    for (double x : traj.states[i]) body += "," + format_real(x);
    body += "\n";
  }
  return body;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"levylab: sampling, tail-index estimation and metastability "
               "experiments for heavy-tailed stochastic gradient dynamics"};
  app.name("levylab");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.footer(
      "Exit codes: 0 ok, 64 usage, 65 parameter domain, 66 unusable data,\n"
      "67 file format, 68 numerical blow-up, 70 internal.\n"
      "Grids accept lo:hi:count (inclusive) or comma lists. Every subcommand\n"
      "accepts --config FILE with key=value lines; command-line flags win.\n"
      "Output files start with a '#' provenance line (CSV) or carry a\n"
      "provenance field (JSON) holding the seed and all parameters.");

  const auto start = std::chrono::steady_clock::now();

  // ---- sample ----------------------------------------------------------
  struct {
    double alpha = 2.0, sigma = 1.0;
    std::size_t n = 1;
    CommonOut common;
  } s_opt;
  auto* s_cmd =
      app.add_subcommand("sample", "draw i.i.d. SaS(sigma) variates (CSV, one per line)");
  s_cmd->add_option("--alpha", s_opt.alpha, "tail index in (0, 2]")->required();
  s_cmd->add_option("--sigma", s_opt.sigma, "scale > 0")->capture_default_str();
  s_cmd->add_option("--n", s_opt.n, "number of draws")->required();
  add_common(s_cmd, s_opt.common, false);

  // ---- estimate --------------------------------------------------------
  struct {
    std::string in_path;
    std::size_t k1 = 0, k2 = 0;
    bool hill = false;
    std::size_t hill_k = 0;
    CommonOut common;
  } e_opt;
  auto* e_cmd = app.add_subcommand(
      "estimate", "estimate the tail index of a sample (one real per line; JSON out)");
  e_cmd->add_option("--in", e_opt.in_path, "input file (default: stdin)");
  e_cmd->add_option("--k1", e_opt.k1, "force the block size (default: closest-divisor rule)");
  e_cmd->add_option("--k2", e_opt.k2, "force the block count");
  e_cmd->add_flag("--hill", e_opt.hill, "also report the Hill estimate");
  e_cmd->add_option("--hill-k", e_opt.hill_k, "order statistics for --hill (default n/10)");
  add_common(e_cmd, e_opt.common, false);

  // ---- calibrate -------------------------------------------------------
  struct {
    std::string alphas = "0.02:2.0:100";
    std::size_t k1 = 100, k2 = 1000, reps = 100;
    CommonOut common;
  } c_opt;
  auto* c_cmd =
      app.add_subcommand("calibrate", "Monte Carlo accuracy table of the tail estimator (CSV)");
  c_cmd->add_option("--alphas", c_opt.alphas, "alpha grid (lo:hi:count or list)")
      ->capture_default_str();
  c_cmd->add_option("--k1", c_opt.k1, "block size")->capture_default_str();
  c_cmd->add_option("--k2", c_opt.k2, "block count")->capture_default_str();
  c_cmd->add_option("--reps", c_opt.reps, "repetitions per alpha")->capture_default_str();
  add_common(c_cmd, c_opt.common);

  // ---- simulate --------------------------------------------------------
  struct {
    std::string potential = "double-well:-1,2";
    double alpha = 1.5, epsilon = 0.1, sigma = -1.0, eta = 1e-3, max_drift = 0.5;
    std::size_t steps = 1000, thin = 0;
    std::string w0;
    CommonOut common;
  } sim_opt;
  auto* sim_cmd =
      app.add_subcommand("simulate", "integrate the noisy descent recursion (CSV trajectory)");
  sim_cmd->add_option("--potential", sim_opt.potential,
                      "quadratic[:dim] | double-well:m1,m2 | product-valley")
      ->capture_default_str();
  sim_cmd->add_option("--alpha", sim_opt.alpha, "tail index in (0, 2]")->capture_default_str();
  auto* eps_opt = sim_cmd->add_option("--epsilon", sim_opt.epsilon,
                                      "noise amplitude (the SDE's coefficient of dL)");
  sim_cmd
      ->add_option("--sigma", sim_opt.sigma,
                   "noise scale in the recursion form; sets epsilon = eta^((alpha-1)/alpha) * sigma")
      ->excludes(eps_opt);
  sim_cmd->add_option("--eta", sim_opt.eta, "step size")->capture_default_str();
  sim_cmd->add_option("--steps", sim_opt.steps, "iterations")->capture_default_str();
  sim_cmd->add_option("--w0", sim_opt.w0, "initial point, comma list (default: origin)");
  sim_cmd->add_option("--thin", sim_opt.thin, "record every thin-th step (0 = auto)");
  sim_cmd->add_option("--max-drift-step", sim_opt.max_drift, "drift substep displacement bound")
      ->capture_default_str();
  add_common(sim_cmd, sim_opt.common, false);

  // ---- levy-path -------------------------------------------------------
  struct {
    double alpha = 1.5, horizon = 1.0, dt = 1e-3;
    std::size_t dim = 1;
    CommonOut common;
  } lp_opt;
  auto* lp_cmd = app.add_subcommand("levy-path", "sample a Levy motion path (CSV)");
  lp_cmd->add_option("--alpha", lp_opt.alpha, "tail index in (0, 2]")->required();
  lp_cmd->add_option("--dim", lp_opt.dim, "dimension")->capture_default_str();
  lp_cmd->add_option("--horizon", lp_opt.horizon, "time horizon")->capture_default_str();
  lp_cmd->add_option("--dt", lp_opt.dt, "time step")->capture_default_str();
  add_common(lp_cmd, lp_opt.common, false);

  // ---- exit-times ------------------------------------------------------
  struct {
    std::string minima = "-1,2", saddles = "0";
    double alpha = 1.5, epsilon = 0.1, eta = 1e-3, delta = 0.0, max_drift = 0.5;
    std::size_t source = 1, reps = 100, budget = 100000000;
    bool first_exit = false;
    CommonOut common;
  } x_opt;
  auto* x_cmd = app.add_subcommand("exit-times",
                                   "transition times between valleys (CSV, one row per replica)");
  x_cmd->add_option("--minima", x_opt.minima, "ascending minima, comma list")
      ->capture_default_str();
  x_cmd->add_option("--saddles", x_opt.saddles, "ascending saddles, comma list")
      ->capture_default_str();
  x_cmd->add_option("--alpha", x_opt.alpha, "tail index in (0, 2]")->capture_default_str();
  x_cmd->add_option("--epsilon", x_opt.epsilon, "noise amplitude")->capture_default_str();
  x_cmd->add_option("--eta", x_opt.eta, "step size")->capture_default_str();
  x_cmd->add_option("--delta", x_opt.delta, "detection ball radius (0 = default rule)");
  x_cmd->add_option("--source", x_opt.source, "starting valley, 1-based")->capture_default_str();
  x_cmd->add_option("--reps", x_opt.reps, "replicas")->capture_default_str();
  x_cmd->add_option("--budget", x_opt.budget, "step budget per replica (censoring)")
      ->capture_default_str();
  x_cmd->add_flag("--first-exit", x_opt.first_exit,
                  "record the first exit from B_source instead of the transition");
  x_cmd->add_option("--max-drift-step", x_opt.max_drift, "drift substep displacement bound")
      ->capture_default_str();
  add_common(x_cmd, x_opt.common);

  // ---- occupation ------------------------------------------------------
  struct {
    std::string minima = "-1,2", saddles = "0";
    double alpha = 1.0, epsilon = 0.05, eta = 1e-3, max_drift = 0.5;
    std::size_t steps = 1000000, start = 1;
    CommonOut common;
  } o_opt;
  auto* o_cmd =
      app.add_subcommand("occupation", "valley occupation fractions of one long run (CSV)");
  o_cmd->add_option("--minima", o_opt.minima, "ascending minima, comma list")
      ->capture_default_str();
  o_cmd->add_option("--saddles", o_opt.saddles, "ascending saddles, comma list")
      ->capture_default_str();
  o_cmd->add_option("--alpha", o_opt.alpha, "tail index in (0, 2]")->capture_default_str();
  o_cmd->add_option("--epsilon", o_opt.epsilon, "noise amplitude")->capture_default_str();
  o_cmd->add_option("--eta", o_opt.eta, "step size")->capture_default_str();
  o_cmd->add_option("--steps", o_opt.steps, "iterations")->capture_default_str();
  o_cmd->add_option("--start", o_opt.start, "starting valley, 1-based")->capture_default_str();
  o_cmd->add_option("--max-drift-step", o_opt.max_drift, "drift substep displacement bound")
      ->capture_default_str();
  add_common(o_cmd, o_opt.common, false);

  // ---- generator -------------------------------------------------------
  struct {
    std::string minima = "-1,2", saddles = "0";
    double alpha = 1.0;
    CommonOut common;
  } g_opt;
  auto* g_cmd = app.add_subcommand("generator", "generator matrix Q and stationary law pi (JSON)");
  g_cmd->add_option("--minima", g_opt.minima, "ascending minima, comma list")
      ->capture_default_str();
  g_cmd->add_option("--saddles", g_opt.saddles, "ascending saddles, comma list")
      ->capture_default_str();
  g_cmd->add_option("--alpha", g_opt.alpha, "tail index in (0, 2]")->capture_default_str();
  add_common(g_cmd, g_opt.common, false);

  // ---- flat-valley -----------------------------------------------------
  struct {
    std::string alphas = "0.5,1.0,1.5,2.0";
    double epsilon = 0.01, eta = 0.01, max_drift = 0.5;
    std::size_t steps = 2000, inits = 500;
    CommonOut common;
  } f_opt;
  auto* f_cmd = app.add_subcommand(
      "flat-valley", "noisy descent statistics on the (w1 w2)^2 valley (CSV, one row per alpha)");
  f_cmd->add_option("--alphas", f_opt.alphas, "alpha grid (lo:hi:count or list)")
      ->capture_default_str();
  f_cmd->add_option("--epsilon", f_opt.epsilon, "noise amplitude")->capture_default_str();
  f_cmd->add_option("--eta", f_opt.eta, "step size")->capture_default_str();
  f_cmd->add_option("--steps", f_opt.steps, "iterations per replica")->capture_default_str();
  f_cmd->add_option("--inits", f_opt.inits, "random initial points per alpha")
      ->capture_default_str();
  f_cmd->add_option("--max-drift-step", f_opt.max_drift, "drift substep displacement bound")
      ->capture_default_str();
  add_common(f_cmd, f_opt.common);

  // ---- measure ---------------------------------------------------------
  struct {
    std::string model = "logistic", loss = "nll", data = "blobs";
    std::string csv_path, idx_images, idx_labels;
    std::size_t n = 1000, d = 10, classes = 2, max_items = 0;
    double sep = 3.0;
    std::size_t b = 100, iters = 1000, log_every = 100;
    double eta = 0.1;
    CommonOut common;
  } m_opt;
  auto* m_cmd = app.add_subcommand(
      "measure", "train with SGD and track the gradient-noise tail index (CSV time series)");
  m_cmd->add_option("--model", m_opt.model, "logistic | mlp:w1[,w2,...]")->capture_default_str();
  m_cmd->add_option("--loss", m_opt.loss, "nll | hinge")->capture_default_str();
  m_cmd->add_option("--data", m_opt.data, "blobs | rings | csv | idx")->capture_default_str();
  m_cmd->add_option("--csv", m_opt.csv_path, "dataset file for --data csv");
  m_cmd->add_option("--idx-images", m_opt.idx_images, "IDX images file for --data idx");
  m_cmd->add_option("--idx-labels", m_opt.idx_labels, "IDX labels file for --data idx");
  m_cmd->add_option("--max-items", m_opt.max_items, "keep only the first N examples (idx)");
  m_cmd->add_option("--n", m_opt.n, "synthetic examples")->capture_default_str();
  m_cmd->add_option("--d", m_opt.d, "synthetic feature dimension")->capture_default_str();
  m_cmd->add_option("--classes", m_opt.classes, "synthetic classes")->capture_default_str();
  m_cmd->add_option("--sep", m_opt.sep, "blob mean separation")->capture_default_str();
  m_cmd->add_option("--b", m_opt.b, "minibatch size")->capture_default_str();
  m_cmd->add_option("--eta", m_opt.eta, "learning rate")->capture_default_str();
  m_cmd->add_option("--iters", m_opt.iters, "SGD iterations")->capture_default_str();
  m_cmd->add_option("--log-every", m_opt.log_every, "measurement period")->capture_default_str();
  add_common(m_cmd, m_opt.common, false);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    expand_config_args(args);
    std::reverse(args.begin(), args.end());  // CLI11's vector parse wants reversed args
    app.parse(std::move(args));
  } catch (const UsageError& e) {
    std::cerr << "error (usage): " << e.message << "\n";
    return kUsage;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*s_cmd) {
      const auto params = stable::validate_params(s_opt.alpha, s_opt.sigma);
      const auto batch = stable::sample(params, s_opt.n, s_opt.common.seed);
      std::string body;
      body.reserve(batch.values.size() * 20);
      for (double v : batch.values) body += format_real(v) + "\n";
      emit("sample",
           {{"alpha", format_real(s_opt.alpha)},
            {"sigma", format_real(s_opt.sigma)},
            {"n", std::to_string(s_opt.n)}},
           s_opt.common, body, start);
    } else if (*e_cmd) {
      std::vector<double> xs;
      if (e_opt.in_path.empty() || e_opt.in_path == "-") {
        xs = read_reals_lines(std::cin, "stdin");
      } else {
        std::ifstream in(e_opt.in_path);
        if (!in) throw FormatError(e_opt.in_path + ": cannot open");
        xs = read_reals_lines(in, e_opt.in_path);
      }
      if ((e_opt.k1 == 0) != (e_opt.k2 == 0))
        throw ParamError("--k1 and --k2 must be given together");
      estimate::Grouping grouping;
      if (e_opt.k1 > 0) {
        if (e_opt.k1 * e_opt.k2 > xs.size())
          throw DataError("forced grouping needs " + std::to_string(e_opt.k1 * e_opt.k2) +
                          " samples, input has " + std::to_string(xs.size()));
        grouping = estimate::Grouping{e_opt.k1, e_opt.k2, xs.size() - e_opt.k1 * e_opt.k2};
      } else {
        grouping = estimate::choose_grouping(xs.size());
      }
      const auto est = estimate::estimate_alpha(xs, grouping);
      json body;
      body["alpha_hat"] = est.alpha_hat;
      body["inv_alpha_hat"] = est.inv_alpha_hat;
      body["k1"] = est.grouping.k1;
      body["k2"] = est.grouping.k2;
      body["dropped"] = est.grouping.dropped;
      body["n"] = xs.size();
      body["out_of_range"] = est.out_of_range;
      ParamList plist{{"in", e_opt.in_path.empty() ? "-" : e_opt.in_path},
                      {"k1", std::to_string(est.grouping.k1)},
                      {"k2", std::to_string(est.grouping.k2)}};
      if (e_opt.hill) {
        const std::size_t k = e_opt.hill_k > 0 ? e_opt.hill_k : xs.size() / 10;
        body["hill_alpha_hat"] = estimate::hill_estimate(xs, k);
        body["hill_k"] = k;
        plist.emplace_back("hill_k", std::to_string(k));
      }
      emit_json("estimate", plist, e_opt.common, body, start);
    } else if (*c_cmd) {
      const auto grid = parse_grid(c_opt.alphas, "--alphas");
      const auto rows = estimate::calibrate(grid, c_opt.k1, c_opt.k2, c_opt.reps,
                                            c_opt.common.seed, c_opt.common.threads);
      std::string body = "alpha,mean_alpha_hat,std_alpha_hat,mae\n";
      for (const auto& r : rows)
        body += format_real(r.alpha) + "," + format_real(r.mean_alpha_hat) + "," +
                format_real(r.std_alpha_hat) + "," + format_real(r.mae) + "\n";
      emit("calibrate",
           {{"alphas", c_opt.alphas},
            {"k1", std::to_string(c_opt.k1)},
            {"k2", std::to_string(c_opt.k2)},
            {"reps", std::to_string(c_opt.reps)}},
           c_opt.common, body, start);
    } else if (*sim_cmd) {
      sde::SdeConfig config;
      config.potential = parse_potential(sim_opt.potential);
      config.alpha = sim_opt.alpha;
      ParamList plist{{"potential", sim_opt.potential}, {"alpha", format_real(sim_opt.alpha)}};
      if (sim_opt.sigma >= 0.0) {
        config.epsilon =
            std::pow(sim_opt.eta, (sim_opt.alpha - 1.0) / sim_opt.alpha) * sim_opt.sigma;
        plist.emplace_back("sigma", format_real(sim_opt.sigma));
        plist.emplace_back("epsilon_resolved", format_real(config.epsilon));
      } else {
        config.epsilon = sim_opt.epsilon;
        plist.emplace_back("epsilon", format_real(config.epsilon));
      }
      config.eta = sim_opt.eta;
      config.steps = sim_opt.steps;
      config.thin = sim_opt.thin;
      config.max_drift_step = sim_opt.max_drift;
      config.seed = sim_opt.common.seed;
      config.w0 = sim_opt.w0.empty() ? std::vector<double>(config.potential->dim(), 0.0)
                                     : parse_real_list(sim_opt.w0, "--w0");
      plist.emplace_back("eta", format_real(config.eta));
      plist.emplace_back("steps", std::to_string(config.steps));
      std::string w0_str;
      for (double x : config.w0) w0_str += (w0_str.empty() ? "" : ",") + format_real(x);
      plist.emplace_back("w0", w0_str);
      const auto traj = sde::simulate(config);
      plist.emplace_back("thin", std::to_string(traj.thinning));
      emit("simulate", plist, sim_opt.common, csv_trajectory(traj, "w"), start);
    } else if (*lp_cmd) {
      const auto traj =
          sde::levy_path(lp_opt.alpha, lp_opt.dim, lp_opt.horizon, lp_opt.dt, lp_opt.common.seed);
      emit("levy-path",
           {{"alpha", format_real(lp_opt.alpha)},
            {"dim", std::to_string(lp_opt.dim)},
            {"horizon", format_real(lp_opt.horizon)},
            {"dt", format_real(lp_opt.dt)},
            {"thin", std::to_string(traj.thinning)}},
           lp_opt.common, csv_trajectory(traj, "l"), start);
    } else if (*x_cmd) {
      meta::ExitConfig config;
      config.landscape = meta::make_landscape(parse_real_list(x_opt.minima, "--minima"),
                                              parse_real_list(x_opt.saddles, "--saddles"));
      config.alpha = x_opt.alpha;
      config.epsilon = x_opt.epsilon;
      config.eta = x_opt.eta;
      config.delta = x_opt.delta;
      if (x_opt.source < 1 || x_opt.source > config.landscape.wells())
        throw ParamError("--source is 1-based and must not exceed the number of minima");
      config.source = x_opt.source - 1;
      config.reps = x_opt.reps;
      config.step_budget = x_opt.budget;
      config.seed = x_opt.common.seed;
      config.threads = x_opt.common.threads;
      config.detection =
          x_opt.first_exit ? meta::ExitDetection::first_exit : meta::ExitDetection::transition;
      config.max_drift_step = x_opt.max_drift;
      const auto stats = meta::exit_times(config);
      std::string body = "rep,time,destination,censored\n";
      for (std::size_t i = 0; i < stats.samples.size(); ++i) {
        const auto& smp = stats.samples[i];
        body += std::to_string(i) + "," + format_real(smp.time) + "," +
                std::to_string(smp.destination + 1) + "," + bool_str(smp.censored) + "\n";
      }
      emit("exit-times",
           {{"minima", x_opt.minima},
            {"saddles", x_opt.saddles},
            {"alpha", format_real(x_opt.alpha)},
            {"epsilon", format_real(x_opt.epsilon)},
            {"eta", format_real(x_opt.eta)},
            {"delta", format_real(stats.delta)},
            {"source", std::to_string(x_opt.source)},
            {"reps", std::to_string(x_opt.reps)},
            {"budget", std::to_string(x_opt.budget)},
            {"detection", x_opt.first_exit ? "first-exit" : "transition"}},
           x_opt.common, body, start);
    } else if (*o_cmd) {
      meta::OccupationConfig config;
      config.landscape = meta::make_landscape(parse_real_list(o_opt.minima, "--minima"),
                                              parse_real_list(o_opt.saddles, "--saddles"));
      config.alpha = o_opt.alpha;
      config.epsilon = o_opt.epsilon;
      config.eta = o_opt.eta;
      config.steps = o_opt.steps;
      if (o_opt.start < 1 || o_opt.start > config.landscape.wells())
        throw ParamError("--start is 1-based and must not exceed the number of minima");
      config.start = o_opt.start - 1;
      config.seed = o_opt.common.seed;
      config.max_drift_step = o_opt.max_drift;
      const auto fractions = meta::occupation(config);
      std::string body = "valley,fraction\n";
      for (std::size_t i = 0; i < fractions.size(); ++i)
        body += std::to_string(i + 1) + "," + format_real(fractions[i]) + "\n";
      emit("occupation",
           {{"minima", o_opt.minima},
            {"saddles", o_opt.saddles},
            {"alpha", format_real(o_opt.alpha)},
            {"epsilon", format_real(o_opt.epsilon)},
            {"eta", format_real(o_opt.eta)},
            {"steps", std::to_string(o_opt.steps)},
            {"start", std::to_string(o_opt.start)}},
           o_opt.common, body, start);
    } else if (*g_cmd) {
      const auto land = meta::make_landscape(parse_real_list(g_opt.minima, "--minima"),
                                             parse_real_list(g_opt.saddles, "--saddles"));
      const auto gen = meta::generator(land, g_opt.alpha);
      const auto pi = meta::stationary(gen);
      json body;
      body["alpha"] = g_opt.alpha;
      body["minima"] = land.minima;
      body["saddles"] = land.saddles;
      json q = json::array();
      for (std::size_t i = 0; i < gen.r; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < gen.r; ++j) row.push_back(gen.at(i, j));
        q.push_back(row);
      }
      body["Q"] = q;
      body["pi"] = pi.pi;
      json rates = json::array();
      for (std::size_t i = 0; i < gen.r; ++i) rates.push_back(gen.exit_rate(i));
      body["exit_rates"] = rates;
      emit_json("generator",
                {{"minima", g_opt.minima},
                 {"saddles", g_opt.saddles},
                 {"alpha", format_real(g_opt.alpha)}},
                g_opt.common, body, start);
    } else if (*f_cmd) {
      sde::FlatValleyConfig config;
      config.alpha_grid = parse_grid(f_opt.alphas, "--alphas");
      config.epsilon = f_opt.epsilon;
      config.eta = f_opt.eta;
      config.steps = f_opt.steps;
      config.inits = f_opt.inits;
      config.seed = f_opt.common.seed;
      config.threads = f_opt.common.threads;
      config.max_drift_step = f_opt.max_drift;
      const auto rows = sde::flat_valley_experiment(config);
      std::string body =
          "alpha,finished,blowups,distance_mean,distance_median,distance_q1,distance_q3,"
          "proxy_mean,proxy_median,proxy_q1,proxy_q3\n";
      for (const auto& r : rows) {
        body += format_real(r.alpha) + "," + std::to_string(r.finished) + "," +
                std::to_string(r.blowups) + "," + format_real(r.distance.mean) + "," +
                format_real(r.distance.median) + "," + format_real(r.distance.q1) + "," +
                format_real(r.distance.q3) + "," + format_real(r.proxy.mean) + "," +
                format_real(r.proxy.median) + "," + format_real(r.proxy.q1) + "," +
                format_real(r.proxy.q3) + "\n";
      }
      emit("flat-valley",
           {{"alphas", f_opt.alphas},
            {"epsilon", format_real(f_opt.epsilon)},
            {"eta", format_real(f_opt.eta)},
            {"steps", std::to_string(f_opt.steps)},
            {"inits", std::to_string(f_opt.inits)}},
           f_opt.common, body, start);
    } else if (*m_cmd) {
      gradnoise::Loss loss;
      if (m_opt.loss == "nll")
        loss = gradnoise::Loss::nll;
      else if (m_opt.loss == "hinge")
        loss = gradnoise::Loss::hinge;
      else
        throw ParamError("--loss must be nll or hinge, got '" + m_opt.loss + "'");

      gradnoise::Dataset data;
      if (m_opt.data == "blobs" || m_opt.data == "gaussian-blobs" || m_opt.data == "rings" ||
          m_opt.data == "ring-mixture") {
        data = gradnoise::synth_dataset(m_opt.n, m_opt.d, m_opt.classes,
                                        gradnoise::parse_synth_spec(m_opt.data),
                                        derive_seed(m_opt.common.seed, 0xda7a), m_opt.sep);
      } else if (m_opt.data == "csv") {
        if (m_opt.csv_path.empty()) throw ParamError("--data csv needs --csv FILE");
        data = gradnoise::load_csv(m_opt.csv_path);
      } else if (m_opt.data == "idx") {
        if (m_opt.idx_images.empty() || m_opt.idx_labels.empty())
          throw ParamError("--data idx needs --idx-images and --idx-labels");
        data = gradnoise::load_idx(m_opt.idx_images, m_opt.idx_labels, m_opt.max_items);
      } else {
        throw ParamError("--data must be blobs, rings, csv or idx, got '" + m_opt.data + "'");
      }

      gradnoise::ModelPtr model;
      if (m_opt.model == "logistic") {
        model = gradnoise::make_logistic(data.d, data.num_classes, loss);
      } else if (m_opt.model.rfind("mlp:", 0) == 0) {
        std::vector<std::size_t> hidden;
        for (double h : parse_real_list(m_opt.model.substr(4), "--model"))
          hidden.push_back(static_cast<std::size_t>(h));
        model = gradnoise::make_mlp(data.d, hidden, data.num_classes, loss);
      } else {
        throw ParamError("--model must be logistic or mlp:w1[,w2,...], got '" + m_opt.model + "'");
      }

      gradnoise::MeasureConfig config;
      config.b = m_opt.b;
      config.eta = m_opt.eta;
      config.iterations = m_opt.iters;
      config.log_every = m_opt.log_every;
      config.seed = m_opt.common.seed;
      const auto series = gradnoise::measure_run(*model, data, config);
      std::string body =
          "iteration,train_loss,train_accuracy,alpha_hat,inv_alpha_hat,k1,k2,dropped,"
          "out_of_range\n";
      for (const auto& p : series) {
        body += std::to_string(p.iteration) + "," + format_real(p.train_loss) + "," +
                format_real(p.train_accuracy) + "," + format_real(p.tail.alpha_hat) + "," +
                format_real(p.tail.inv_alpha_hat) + "," + std::to_string(p.tail.grouping.k1) +
                "," + std::to_string(p.tail.grouping.k2) + "," +
                std::to_string(p.tail.grouping.dropped) + "," + bool_str(p.tail.out_of_range) +
                "\n";
      }
      emit("measure",
           {{"model", m_opt.model},
            {"loss", m_opt.loss},
            {"data", m_opt.data},
            {"n", std::to_string(data.n)},
            {"d", std::to_string(data.d)},
            {"classes", std::to_string(data.num_classes)},
            {"b", std::to_string(m_opt.b)},
            {"eta", format_real(m_opt.eta)},
            {"iters", std::to_string(m_opt.iters)},
            {"log_every", std::to_string(m_opt.log_every)}},
           m_opt.common, body, start);
    }
  } catch (const ParamError& e) {
    std::cerr << "error (parameter domain): " << e.what() << "\n";
    return kParamError;
  } catch (const DataError& e) {
    std::cerr << "error (unusable data): " << e.what() << "\n";
    return kDataError;
  } catch (const FormatError& e) {
    std::cerr << "error (file format): " << e.what() << "\n";
    return kFormatError;
  } catch (const BlowupError& e) {
    std::cerr << "error (numerical blow-up): " << e.what() << "\n";
    return kBlowupError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
