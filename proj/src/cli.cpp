#include "ovcost/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>

#include "ovcost/coder.hpp"
#include "ovcost/cost_model.hpp"
#include "ovcost/errors.hpp"
#include "ovcost/overflow.hpp"
#include "ovcost/sources.hpp"
#include "ovcost/spectrum.hpp"

#ifndef OVCOST_VERSION
#define OVCOST_VERSION "0.0.0"
#endif

namespace ovc::cli {

const char* version() { return OVCOST_VERSION; }

namespace {

using json = nlohmann::json;

constexpr const char* kPackedMagic = "OVCPACK1";

// Config parsing --------------------------------------------------------------

Rational rational_of(const json& j, const std::string& what) {
  if (j.is_string()) return parse_decimal(j.get<std::string>());
  // Numbers are re-read from their shortest decimal form, so 0.1 means 1/10.
  if (j.is_number()) return parse_decimal(j.dump());
  throw InvalidInput(what + " must be a number or a decimal string");
}

std::vector<Rational> rationals_of(const json& j, const std::string& what) {
  if (!j.is_array()) throw InvalidInput(what + " must be an array");
  std::vector<Rational> out;
  for (const auto& v : j) out.push_back(rational_of(v, what));
  return out;
}

const json& member(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InvalidInput(where + " is missing '" + key + "'");
  return j.at(key);
}

SourceModel parse_source(const json& j) {
  if (!j.is_object()) throw InvalidInput("source must be an object");
  if (j.contains("bernoulli")) return SourceModel::bernoulli(rational_of(j.at("bernoulli"), "bernoulli"));
  const std::string type = j.value("type", "");
  if (type == "iid") return SourceModel::iid(rationals_of(member(j, "pmf", "iid source"), "pmf"));
  if (type == "markov") {
    std::vector<std::vector<Rational>> rows;
    const json& t = member(j, "transition", "markov source");
    if (!t.is_array()) throw InvalidInput("transition must be an array of rows");
    for (const auto& row : t) rows.push_back(rationals_of(row, "transition row"));
    return SourceModel::markov(rationals_of(member(j, "initial", "markov source"), "initial"), std::move(rows));
  }
  if (type == "mixture") {
    const json& comps = member(j, "components", "mixture source");
    if (!comps.is_array()) throw InvalidInput("components must be an array");
    std::vector<std::pair<Rational, SourceModel>> parts;
    for (const auto& c : comps) {
      parts.emplace_back(rational_of(member(c, "weight", "mixture component"), "weight"),
                         parse_source(member(c, "source", "mixture component")));
    }
    return SourceModel::mixture(std::move(parts));
  }
  throw InvalidInput("unknown source type '" + type + "' (expected bernoulli, iid, markov or mixture)");
}

CostFunction parse_cost(const json& j) {
  if (!j.is_object()) throw InvalidInput("cost must be an object");
  if (j.contains("unit")) {
    const json& k = j.at("unit");
    if (!k.is_number_integer()) throw InvalidInput("unit cost needs an integer alphabet size");
    return CostFunction::unit(k.get<int>());
  }
  if (j.contains("costs")) return CostFunction::memoryless(rationals_of(j.at("costs"), "costs"));
  if (j.contains("table")) {
    const json& t = j.at("table");
    if (!t.is_object()) throw InvalidInput("cost table must map contexts to cost lists");
    const json& kj = member(j, "K", "cost table");
    if (!kj.is_number_integer()) throw InvalidInput("K must be an integer");
    std::map<Word, std::vector<Rational>> table;
    int depth = 0;
    for (const auto& [key, costs] : t.items()) {
      Word ctx = digits_to_word(key);
      depth = std::max(depth, static_cast<int>(ctx.size()));
      table.emplace(std::move(ctx), rationals_of(costs, "costs of context '" + key + "'"));
    }
    if (j.contains("depth")) depth = j.at("depth").get<int>();
    return CostFunction(kj.get<int>(), depth, table);
  }
  throw InvalidInput("cost needs one of 'unit', 'costs' or 'table'");
}

// Settings --------------------------------------------------------------------

struct Grid {
  std::vector<double> points;
  json echo;
};

struct Settings {
  std::string command;
  json source = nullptr;
  json cost = json{{"unit", 2}};
  std::vector<int> n_list;
  std::vector<double> epsilons = {0.5};
  std::string kind = "first";
  std::optional<double> a;
  std::optional<double> L;
  std::optional<double> R;
  std::optional<double> eta;
  std::string z_kind = "direct";
  double z_value = 0.1;
  std::optional<Grid> grid;
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;
  std::uint64_t budget = std::uint64_t{1} << 16;
  std::string method = "auto";
  std::string format = "text";
  std::string input;
  std::string codebook_path;
  bool corrupt = false;
  bool n_from_flag = false;
};

std::optional<double> optional_number(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number()) throw InvalidInput(std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

std::vector<int> ints_of(const json& j, const char* key) {
  std::vector<int> out;
  if (j.is_number_integer()) return {j.get<int>()};
  if (!j.is_array()) throw InvalidInput(std::string("'") + key + "' must be an integer or an array of integers");
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw InvalidInput(std::string("'") + key + "' entries must be integers");
    out.push_back(v.get<int>());
  }
  return out;
}

Grid parse_grid(const json& j) {
  Grid g;
  g.echo = j;
  if (j.is_array()) {
    for (const auto& v : j) {
      if (!v.is_number()) throw InvalidInput("grid entries must be numbers");
      g.points.push_back(v.get<double>());
    }
  } else if (j.is_object()) {
    const auto lo = optional_number(j, "lo");
    const auto hi = optional_number(j, "hi");
    const auto step = optional_number(j, "step");
    if (!lo || !hi || !step) throw InvalidInput("grid object needs lo, hi and step");
    g.points = make_grid(*lo, *hi, *step);
  } else {
    throw InvalidInput("grid must be an array or {lo, hi, step}");
  }
  return g;
}

void apply_config(Settings& s, const json& j) {
  if (!j.is_object()) throw InvalidInput("config must be a JSON object");
  static const std::vector<std::string> known = {"source", "cost",   "n",      "n_list", "n_schedule", "epsilon",
                                                 "kind",   "a",      "L",      "R",      "eta",        "z_rule",
                                                 "grid",   "trials", "seed",   "budget", "method",     "format",
                                                 "input",  "description"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InvalidInput("unknown config key '" + key + "'");
    }
  }
  if (j.contains("source")) s.source = j.at("source");
  if (j.contains("cost")) s.cost = j.at("cost");
  for (const char* key : {"n", "n_list", "n_schedule"}) {
    if (j.contains(key)) s.n_list = ints_of(j.at(key), key);
  }
  if (j.contains("epsilon")) {
    const json& e = j.at("epsilon");
    s.epsilons.clear();
    if (e.is_number()) {
      s.epsilons.push_back(e.get<double>());
    } else if (e.is_array()) {
      for (const auto& v : e) s.epsilons.push_back(v.get<double>());
    } else {
      throw InvalidInput("'epsilon' must be a number or an array");
    }
  }
  if (j.contains("kind")) s.kind = j.at("kind").get<std::string>();
  s.a = optional_number(j, "a");
  s.L = optional_number(j, "L");
  s.R = optional_number(j, "R");
  s.eta = optional_number(j, "eta");
  if (j.contains("z_rule")) {
    const json& z = j.at("z_rule");
    s.z_kind = z.value("kind", s.z_kind);
    if (z.contains("gamma")) s.z_value = z.at("gamma").get<double>();
    if (z.contains("z")) s.z_value = z.at("z").get<double>();
  }
  if (j.contains("grid")) s.grid = parse_grid(j.at("grid"));
  if (j.contains("trials")) s.trials = j.at("trials").get<std::uint64_t>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("budget")) s.budget = j.at("budget").get<std::uint64_t>();
  if (j.contains("method")) s.method = j.at("method").get<std::string>();
  if (j.contains("format")) s.format = j.at("format").get<std::string>();
  if (j.contains("input")) s.input = j.at("input").get<std::string>();
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput("config '" + path + "' is not valid JSON: " + e.what());
  }
}

ZRule z_rule_of(const Settings& s) {
  ZRule z;
  if (s.z_kind == "direct") {
    z.kind = ZRule::Kind::Direct;
  } else if (s.z_kind == "converse") {
    z.kind = ZRule::Kind::Converse;
  } else if (s.z_kind == "fixed") {
    z.kind = ZRule::Kind::Fixed;
  } else {
    throw InvalidInput("z_rule kind must be direct, converse or fixed");
  }
  z.value = s.z_value;
  if (!(z.value > 0.0) || !std::isfinite(z.value)) throw InvalidInput("z rule parameter must be positive (z <= 0 rejected)");
  return z;
}

json effective_config(const Settings& s) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["command"] = s.command;
  j["source"] = s.source;
  j["cost"] = s.cost;
  j["n"] = s.n_list;
  j["epsilon"] = s.epsilons;
  j["kind"] = s.kind;
  j["a"] = opt(s.a);
  j["L"] = opt(s.L);
  j["R"] = opt(s.R);
  j["eta"] = opt(s.eta);
  j["z_rule"] = {{"kind", s.z_kind}, {s.z_kind == "fixed" ? "z" : "gamma", s.z_value}};
  j["grid"] = s.grid ? s.grid->echo : json(nullptr);
  j["trials"] = s.trials;
  j["seed"] = s.seed;
  j["budget"] = s.budget;
  j["method"] = s.method;
  j["format"] = s.format;
  return j;
}

void write_header(std::ostream& os, const Settings& s, const std::vector<std::string>& extra = {}) {
  os << "# ovcost " << version() << '\n';
  os << "# command: " << s.command << '\n';
  os << "# config: " << effective_config(s).dump() << '\n';
  for (const auto& line : extra) os << "# " << line << '\n';
}

// Shared model setup ---------------------------------------------------------------

struct Model {
  SourceModel source;
  CostFunction cost;
  CostCapacity capacity;
  int K;
};

SourceModel require_source(const Settings& s) {
  if (s.source.is_null()) throw InvalidInput("config needs a 'source'");
  return parse_source(s.source);
}

Model load_model(const Settings& s) {
  SourceModel src = require_source(s);
  CostFunction cost = parse_cost(s.cost);
  CostCapacity cap = solve_cost_capacity(cost);
  const int K = cost.alphabet_size();
  return Model{std::move(src), std::move(cost), std::move(cap), K};
}

// Default rate around which thresholds are placed: the sup-entropy rate / alpha.
double default_rate(const Model& m, const char* what) {
  const auto h = analytic_sup_entropy_rate(m.source, m.K);
  if (!h) throw InvalidInput(std::string("'") + what + "' must be given for this source");
  return *h / m.capacity.alpha_c;
}

int single_n(const Settings& s) {
  if (s.n_list.size() != 1) throw InvalidInput("this command needs exactly one block length n");
  if (s.n_list.front() < 1) throw InvalidInput("n must be positive");
  return s.n_list.front();
}

void check_digits(const Word& w, int alphabet, const char* what) {
  for (int v : w) {
    if (v < 0 || v >= alphabet) throw InvalidInput(std::string(what) + " symbol " + std::to_string(v) + " out of range");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Digits of a text file, skipping '#' lines and whitespace.
Word read_digit_file(const std::string& text) {
  Word w;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '#') continue;
    for (char ch : line) {
      if (std::isspace(static_cast<unsigned char>(ch))) continue;
      if (!std::isdigit(static_cast<unsigned char>(ch))) throw InvalidInput(std::string("non-digit symbol '") + ch + "'");
      w.push_back(ch - '0');
    }
  }
  return w;
}

// Commands ---------------------------------------------------------------------------

int cmd_capacity(Settings& s, std::ostream& os, std::ostream& err) {
  const CostFunction cost = parse_cost(s.cost);
  CostCapacity cap;
  try {
    cap = solve_cost_capacity(cost);
  } catch (const CapacityNotUniform& e) {
    err << "error: " << e.what() << '\n';
    for (const auto& o : e.offenders()) err << "  context '" << o.context << "': root " << format_real(o.root) << '\n';
    return kExitValidation;
  }
  write_header(os, s, {"K: " + std::to_string(cost.alphabet_size()), "alpha_c: " + format_real(cap.alpha_c)});
  os << "context,root,residual\n";
  for (const auto& ctx : cost.contexts()) {
    os << '"' << context_label(ctx) << "\"," << format_real(cap.per_context_roots.at(ctx)) << ','
       << format_real(capacity_residual(cost, ctx, cap.alpha_c)) << '\n';
  }
  return kExitOk;
}

int cmd_encode(Settings& s, std::ostream& os, std::ostream& err, bool to_file) {
  if (s.input.empty()) throw InvalidInput("encode needs --input");
  if (s.n_list.empty()) s.n_list = {8};
  const Model m = load_model(s);
  const int n = single_n(s);
  const Word x = read_digit_file(read_file(s.input));
  if (x.empty()) throw InvalidInput("input holds no source symbols");
  check_digits(x, m.source.alphabet_size(), "source");
  if (x.size() % static_cast<std::size_t>(n) != 0) {
    throw InvalidInput("input length " + std::to_string(x.size()) + " is not a multiple of n = " + std::to_string(n));
  }
  if (s.format != "text" && s.format != "packed") throw InvalidInput("format must be text or packed");
  if (s.format == "packed" && m.K != 2) throw InvalidInput("packed output needs a binary code alphabet");
  if (m.K > 10) throw InvalidInput("text streams need a code alphabet of at most 10 symbols");

  EncoderOptions opt;
  opt.materialize_budget = s.budget;
  const IntervalEncoder enc(m.source, n, m.cost, m.capacity, opt);
  Word stream;
  Rational total_cost = 0;
  const std::size_t blocks = x.size() / static_cast<std::size_t>(n);
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto cw = enc.encode(std::span<const int>(x).subspan(b * n, n));
    stream.insert(stream.end(), cw.symbols.begin(), cw.symbols.end());
    total_cost += cw.cost;
  }
  const std::string summary = "blocks=" + std::to_string(blocks) + " source_symbols=" + std::to_string(x.size()) +
                              " code_symbols=" + std::to_string(stream.size()) +
                              " total_cost=" + format_fixed(total_cost.get_d(), 12) +
                              " cost_per_source_symbol=" + format_real(total_cost.get_d() / x.size());
  if (s.format == "packed") {
    const auto bytes = pack_bits(stream);
    os << kPackedMagic << '\n' << "n " << n << '\n' << "blocks " << blocks << '\n' << "bits " << stream.size() << '\n';
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  } else {
    write_header(os, s,
                 {"n: " + std::to_string(n), "blocks: " + std::to_string(blocks),
                  "code_symbols: " + std::to_string(stream.size()),
                  "total_cost: " + format_fixed(total_cost.get_d(), 12)});
    os << word_to_digits(stream) << '\n';
  }
  if (!s.codebook_path.empty()) {
    std::ofstream f(s.codebook_path);
    if (!f) throw InvalidInput("cannot write '" + s.codebook_path + "'");
    export_codebook(f, enc.codebook());
  }
  if (to_file) err << summary << '\n';
  return kExitOk;
}

int cmd_decode(Settings& s, std::ostream& os) {
  if (s.input.empty()) throw InvalidInput("decode needs --input");
  const Model m = load_model(s);
  const std::string text = read_file(s.input);
  int n = 0;
  std::size_t blocks = 0;
  Word stream;
  const std::string magic = std::string(kPackedMagic) + "\n";
  if (text.compare(0, magic.size(), magic) == 0) {
    std::istringstream in(text.substr(magic.size()));
    std::string key;
    std::size_t bits = 0;
    in >> key >> n;
    if (key != "n") throw DecodeFailure("packed header: expected 'n'");
    in >> key >> blocks;
    if (key != "blocks") throw DecodeFailure("packed header: expected 'blocks'");
    in >> key >> bits;
    if (key != "bits" || !in) throw DecodeFailure("packed header: expected 'bits'");
    in.get();
    const std::string rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (rest.size() != (bits + 7) / 8) throw DecodeFailure("packed payload has the wrong size");
    const std::vector<std::uint8_t> bytes(rest.begin(), rest.end());
    stream = unpack_bits(bytes, bits);
  } else {
    std::istringstream in(text);
    std::string line;
    std::string digits;
    while (std::getline(in, line)) {
      if (line.rfind("# n: ", 0) == 0) {
        n = std::stoi(line.substr(5));
      } else if (line.rfind("# blocks: ", 0) == 0) {
        blocks = std::stoull(line.substr(10));
      } else if (line.empty() || line.front() == '#') {
        continue;
      } else {
        digits += line;
      }
    }
    stream = digits_to_word(digits);
  }
  if (n < 1) throw DecodeFailure("stream header lacks the block length");
  // The stream header decides n; an explicit --n must agree with it.
  if (s.n_from_flag && single_n(s) != n) throw InvalidInput("--n differs from the stream's block length");
  s.n_list = {n};
  check_digits(stream, m.K, "code");

  EncoderOptions opt;
  opt.materialize_budget = s.budget;
  const IntervalEncoder enc(m.source, n, m.cost, m.capacity, opt);
  Word out;
  std::size_t pos = 0;
  std::size_t decoded = 0;
  while (pos < stream.size()) {
    const auto [x, used] = enc.decode_prefix(std::span<const int>(stream).subspan(pos));
    out.insert(out.end(), x.begin(), x.end());
    pos += used;
    ++decoded;
  }
  if (decoded != blocks) throw DecodeFailure("stream holds a different number of blocks than its header says");
  os << word_to_digits(out) << '\n';
  return kExitOk;
}

VerifyOptions verify_options(const Settings& s) {
  VerifyOptions opt;
  if (s.method == "auto") {
    opt.method = Method::Auto;
  } else if (s.method == "exact") {
    opt.method = Method::Exact;
  } else if (s.method == "mc") {
    opt.method = Method::MonteCarlo;
  } else {
    throw InvalidInput("method must be auto, exact or mc");
  }
  if (s.trials == 0) throw InvalidInput("trials must be at least 1");
  opt.trials = s.trials;
  opt.seed = s.seed;
  opt.encoder.materialize_budget = s.budget;
  opt.enumeration_budget = std::max(s.budget, kDefaultEnumerationBudget);
  return opt;
}

ThresholdSchedule schedule_of(Settings& s, const Model& m) {
  if (s.eta) {
    std::map<int, double> table;
    for (int n : s.n_list) table[n] = *s.eta;
    return ThresholdSchedule::explicit_table(std::move(table));
  }
  if (s.kind == "second") {
    if (!s.a) s.a = default_rate(m, "a");
    if (!s.L) throw InvalidInput("second-order schedule needs 'L'");
    return ThresholdSchedule::second_order(*s.a, *s.L);
  }
  if (s.kind != "first") throw InvalidInput("kind must be first or second");
  if (!s.R) s.R = default_rate(m, "R");
  return ThresholdSchedule::first_order(*s.R);
}

int cmd_bounds(Settings& s, std::ostream& os, std::ostream& err, bool verify) {
  if (s.n_list.empty()) s.n_list = {4, 8, 12};
  const Model m = load_model(s);
  const ThresholdSchedule schedule = schedule_of(s, m);
  const ZRule z = z_rule_of(s);
  VerifyOptions opt = verify_options(s);
  if (s.corrupt) {
    opt.corrupt = [](const Codebook& cb, const SourceModel& src, const CostFunction& c) {
      return swap_extremes(cb, src, c);
    };
  }
  const auto reports = verify_bounds(m.source, m.cost, m.capacity, schedule, s.n_list, z, opt);

  std::size_t fail1 = 0;
  std::size_t fail2 = 0;
  std::size_t uncertified = 0;
  std::size_t ties = 0;
  for (const auto& r : reports) {
    fail1 += r.pass1 ? 0 : 1;
    fail2 += r.pass2 ? 0 : 1;
    uncertified += r.cost_bound_certified ? 0 : 1;
    ties += r.ties;
  }
  write_header(os, s,
               {"alpha_c: " + format_real(m.capacity.alpha_c), "c_max: " + format_real(m.cost.c_max()),
                "schedule: " + schedule.describe(), "z_rule: " + z.describe(),
                "summary: rows=" + std::to_string(reports.size()) + " lemma1_failures=" + std::to_string(fail1) +
                    " lemma2_failures=" + std::to_string(fail2) + " cost_bound_uncertified=" +
                    std::to_string(uncertified) + " ties=" + std::to_string(ties) +
                    (s.corrupt ? " codebook=corrupted" : " codebook=constructed")});
  write_bound_rows(os, reports);
  if (!verify) return kExitOk;
  // The achievability check only binds the constructed code.
  const bool ok = fail2 == 0 && uncertified == 0 && (s.corrupt || fail1 == 0);
  if (!ok) {
    err << "bound check failed: lemma1_failures=" << fail1 << " lemma2_failures=" << fail2
        << " cost_bound_uncertified=" << uncertified << '\n';
    return kExitBoundViolation;
  }
  return kExitOk;
}

SpectrumOptions spectrum_options(const Settings& s, const SourceModel& src) {
  SpectrumOptions opt;
  opt.trials = s.trials;
  opt.seed = s.seed;
  opt.budget = s.budget;
  if (s.method == "auto") {
    opt.method = SpectrumMethod::Auto;
  } else if (s.method == "exact") {
    // Zero-variance evaluation: the count representation when it applies.
    opt.method = has_count_spectrum(src) ? SpectrumMethod::Binomial : SpectrumMethod::Exact;
  } else if (s.method == "binomial") {
    opt.method = SpectrumMethod::Binomial;
  } else if (s.method == "enumerate") {
    opt.method = SpectrumMethod::Exact;
  } else if (s.method == "mc") {
    opt.method = SpectrumMethod::MonteCarlo;
  } else {
    throw InvalidInput("method must be auto, exact, binomial, enumerate or mc");
  }
  if (opt.method == SpectrumMethod::MonteCarlo && s.trials == 0) throw InvalidInput("trials must be at least 1");
  return opt;
}

void spectrum_defaults(Settings& s, const Model& m) {
  if (s.n_list.empty()) s.n_list = power_of_two_schedule(6, 14);
  for (int n : s.n_list) {
    if (n < 1) throw InvalidInput("block lengths must be positive");
  }
  if (s.kind == "second") {
    if (!s.a) s.a = default_rate(m, "a");
    if (!s.grid) s.grid = parse_grid(json{{"lo", -5.0}, {"hi", 5.0}, {"step", 0.01}});
  } else if (s.kind == "first") {
    if (!s.grid) s.grid = parse_grid(json{{"lo", 0.0}, {"hi", 4.0}, {"step", 0.01}});
  } else {
    throw InvalidInput("kind must be first or second");
  }
  if (!std::is_sorted(s.grid->points.begin(), s.grid->points.end())) throw InvalidInput("grid must be sorted");
}

SpectrumCurve curve_for(const Settings& s, const Model& m, int n, const SpectrumOptions& opt) {
  if (s.kind == "second") return spectrum_second_order(m.source, m.capacity.alpha_c, m.K, *s.a, n, s.grid->points, opt);
  return spectrum_first_order(m.source, m.capacity.alpha_c, m.K, n, s.grid->points, opt);
}

int cmd_spectrum(Settings& s, std::ostream& os) {
  const Model m = load_model(s);
  spectrum_defaults(s, m);
  const SpectrumOptions opt = spectrum_options(s, m.source);
  std::vector<int> sched = s.n_list;
  std::sort(sched.begin(), sched.end());
  sched.erase(std::unique(sched.begin(), sched.end()), sched.end());
  std::vector<SpectrumCurve> curves;
  for (int n : sched) curves.push_back(curve_for(s, m, n, opt));
  write_header(os, s, {"alpha_c: " + format_real(m.capacity.alpha_c), "K: " + std::to_string(m.K)});
  write_spectrum_rows(os, curves);
  return kExitOk;
}

int cmd_threshold(Settings& s, std::ostream& os, std::ostream& err) {
  const Model m = load_model(s);
  spectrum_defaults(s, m);
  const SpectrumOptions opt = spectrum_options(s, m.source);
  for (double eps : s.epsilons) {
    if (!(eps >= 0.0 && eps < 1.0)) throw DomainError("epsilon must lie in [0, 1)");
  }
  std::vector<int> sched = s.n_list;
  std::sort(sched.begin(), sched.end());
  sched.erase(std::unique(sched.begin(), sched.end()), sched.end());

  std::vector<SpectrumCurve> curves;
  for (int n : sched) curves.push_back(curve_for(s, m, n, opt));

  std::ostringstream rows;
  rows << "epsilon,kind,a,n,lower,upper,estimate,analytic,method,trials,seed\n";
  bool missing = false;
  for (double eps : s.epsilons) {
    std::optional<double> analytic;
    if (s.kind == "first") {
      analytic = analytic_first_order_threshold(m.source, m.capacity.alpha_c, m.K, eps);
    } else if (m.source.kind() == SourceModel::Kind::Iid && eps > 0.0) {
      const auto st = self_info_stats(m.source.pmf(), m.K);
      if (st.sigma2 > 1e-15 && std::fabs(*s.a - st.entropy / m.capacity.alpha_c) <= 1e-9 * std::max(1.0, *s.a)) {
        analytic = threshold_second_order_iid(m.source.pmf(), m.capacity.alpha_c, m.K, eps);
      }
    }
    for (const auto& c : curves) {
      const bool mc = c.method == SpectrumMethod::MonteCarlo;
      rows << format_real(eps) << ',' << s.kind << ',' << (s.kind == "second" ? format_real(*s.a) : "") << ','
           << c.n << ',';
      try {
        const Bracket b = crossing_bracket(c, eps);
        rows << format_real(b.lower) << ',' << format_real(b.upper) << ',' << format_real(0.5 * (b.lower + b.upper));
      } catch (const BracketNotFound&) {
        rows << ",,";
        if (c.n == sched.back()) missing = true;
      }
      rows << ',' << (analytic ? format_real(*analytic) : "") << ',' << method_name(c.method) << ','
           << (mc ? std::to_string(c.trials) : "") << ',' << (mc ? std::to_string(c.seed) : "") << '\n';
    }
  }
  write_header(os, s, {"alpha_c: " + format_real(m.capacity.alpha_c), "K: " + std::to_string(m.K)});
  os << rows.str();
  if (missing) {
    err << "error: the curve at the largest n does not cross epsilon inside the grid\n";
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variable-length coding under unequal symbol costs: overflow probability and information spectra",
               "ovcost"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_path;
  std::optional<int> n_flag;
  std::optional<double> eps_flag;
  std::optional<double> a_flag;
  std::optional<std::uint64_t> trials_flag;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::uint64_t> budget_flag;
  std::optional<std::string> input_flag;
  std::optional<std::string> format_flag;
  bool exact_flag = false;
  bool mc_flag = false;
  bool corrupt_flag = false;

  app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--n", n_flag, "block length (overrides the config schedule)");
  app.add_option("--epsilon", eps_flag, "overflow level epsilon");
  app.add_option("--a", a_flag, "first-order rate for second-order analysis");
  app.add_option("--trials", trials_flag, "Monte Carlo sample count");
  app.add_option("--seed", seed_flag, "Monte Carlo seed");
  app.add_option("--out", out_path, "output file (default: stdout)");
  app.add_option("--budget", budget_flag, "largest |X|^n evaluated exhaustively");
  app.add_option("--input", input_flag, "input file for encode / decode");
  app.add_option("--format", format_flag, "encode output: text or packed");
  std::string codebook_flag;
  app.add_option("--export-codebook", codebook_flag, "encode: also write the materialized codebook");
  auto* exact = app.add_flag("--exact", exact_flag, "exhaustive / zero-variance evaluation");
  auto* mc = app.add_flag("--mc", mc_flag, "Monte Carlo evaluation");
  exact->excludes(mc);
  app.add_flag("--corrupt-codebook", corrupt_flag, "test hook: evaluate a deliberately bad codebook");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"capacity", "solve the cost capacity"},
      {"encode", "encode a file of source symbols"},
      {"decode", "decode a codeword stream"},
      {"overflow", "overflow probability with both bound values"},
      {"verify-bounds", "check the achievability and converse bounds (exit 2 on violation)"},
      {"spectrum", "finite-n information-spectrum curves"},
      {"threshold", "first- or second-order threshold brackets"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o;
    std::ostringstream e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kExitOk : kExitValidation;
  }

  Settings s;
  s.command = app.get_subcommands().front()->get_name();
  try {
    if (!config_path.empty()) apply_config(s, read_json_file(config_path));
    if (n_flag) {
      s.n_list = {*n_flag};
      s.n_from_flag = true;
    }
    if (eps_flag) s.epsilons = {*eps_flag};
    if (a_flag) s.a = *a_flag;
    if (trials_flag) s.trials = *trials_flag;
    if (seed_flag) s.seed = *seed_flag;
    if (budget_flag) s.budget = *budget_flag;
    if (input_flag) s.input = *input_flag;
    if (format_flag) s.format = *format_flag;
    if (exact_flag) s.method = "exact";
    if (mc_flag) s.method = "mc";
    s.codebook_path = codebook_flag;
    if (!s.codebook_path.empty() && s.command != "encode") throw InvalidInput("--export-codebook only applies to encode");
    s.corrupt = corrupt_flag;
    if (s.corrupt && s.command != "verify-bounds") throw InvalidInput("--corrupt-codebook only applies to verify-bounds");

    std::ostringstream report;
    int code = kExitOk;
    const bool to_file = !out_path.empty();
    if (s.command == "capacity") {
      code = cmd_capacity(s, report, err);
    } else if (s.command == "encode") {
      code = cmd_encode(s, report, err, to_file);
    } else if (s.command == "decode") {
      code = cmd_decode(s, report);
    } else if (s.command == "overflow") {
      code = cmd_bounds(s, report, err, false);
    } else if (s.command == "verify-bounds") {
      code = cmd_bounds(s, report, err, true);
    } else if (s.command == "spectrum") {
      code = cmd_spectrum(s, report);
    } else if (s.command == "threshold") {
      code = cmd_threshold(s, report, err);
    }
    if (to_file) {
      std::ofstream f(out_path, std::ios::binary);
      if (!f) throw InvalidInput("cannot write '" + out_path + "'");
      f << report.str();
    } else {
      out << report.str();
    }
    return code;
  } catch (const ConstructionBug& e) {
    err << "self-check failed: " << e.what() << '\n';
    return kExitBoundViolation;
  } catch (const BoundViolation& e) {
    err << "bound violation: " << e.what() << '\n';
    return kExitBoundViolation;
  } catch (const CapacityNotUniform& e) {
    err << "error: " << e.what() << '\n';
    for (const auto& o : e.offenders()) err << "  context '" << o.context << "': root " << format_real(o.root) << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace ovc::cli
