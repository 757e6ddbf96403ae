#include "ddspec/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ddspec/error.hpp"

namespace ddspec {

namespace fs = std::filesystem;

namespace {

const Json& field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw InvalidArgument(where + "." + key + ": missing");
  return *it;
}

double number(const Json& j, const char* key, const std::string& where) {
  const auto& v = field(j, key, where);
  if (!v.is_number()) throw InvalidArgument(where + "." + key + ": expected a number");
  return v.get<double>();
}

double number_or(const Json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return number(j, key, where);
}

int integer(const Json& j, const char* key, const std::string& where) {
  const auto& v = field(j, key, where);
  if (!v.is_number_integer()) throw InvalidArgument(where + "." + key + ": expected an integer");
  return v.get<int>();
}

std::vector<double> numbers(const Json& j, const char* key, const std::string& where) {
  const auto& v = field(j, key, where);
  if (!v.is_array()) throw InvalidArgument(where + "." + key + ": expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw InvalidArgument(where + "." + key + "[" + std::to_string(i) + "]: expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

// Rethrows a model-level validation failure with the document path attached.
template <class F>
void checked(const std::string& where, F&& f) {
  try {
    f();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(where + ": " + e.what());
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

Json nsd_to_json(const Nsd& nsd) {
  if (const auto* g = std::get_if<GaussianNsd>(&nsd)) {
    return {{"type", "gaussian"},
            {"y0", per_us_to_per_ms(g->y0)},
            {"a", per_us_to_per_ms(g->amplitude)},
            {"nu_l_khz", angular_to_khz(g->center)},
            {"sigma_khz", angular_to_khz(g->width)}};
  }
  const auto& t = std::get<TabulatedNsd>(nsd);
  Json omega = Json::array();
  Json value = Json::array();
  for (std::size_t i = 0; i < t.omega.size(); ++i) {
    omega.push_back(angular_to_khz(t.omega[i]));
    value.push_back(per_us_to_per_ms(t.value[i]));
  }
  return {{"type", "tabulated"}, {"nu_khz", omega}, {"s", value}};
}

Nsd nsd_from_json(const Json& j, const std::string& where) {
  const auto& type = field(j, "type", where);
  if (!type.is_string()) throw InvalidArgument(where + ".type: expected a string");
  if (type == "gaussian") {
    GaussianNsd g{per_ms_to_per_us(number(j, "y0", where)), per_ms_to_per_us(number(j, "a", where)),
                  khz_to_angular(number(j, "nu_l_khz", where)),
                  khz_to_angular(number(j, "sigma_khz", where))};
    checked(where, [&] { g.validate(); });
    return g;
  }
  if (type == "tabulated") {
    TabulatedNsd t;
    for (double v : numbers(j, "nu_khz", where)) t.omega.push_back(khz_to_angular(v));
    for (double v : numbers(j, "s", where)) t.value.push_back(per_ms_to_per_us(v));
    checked(where, [&] { t.validate(); });
    return t;
  }
  throw InvalidArgument(where + ".type: expected \"gaussian\" or \"tabulated\"");
}

Json coupling_to_json(const NuclearCoupling& c) {
  return {{"omega_par_khz", angular_to_khz(c.omega_par)},
          {"omega_perp_khz", angular_to_khz(c.omega_perp)}};
}

NuclearCoupling coupling_from_json(const Json& j, const std::string& where) {
  auto c = NuclearCoupling::from_khz(number(j, "omega_par_khz", where),
                                     number(j, "omega_perp_khz", where));
  checked(where, [&] { c.validate(); });
  return c;
}

Json env_to_json(const EnvironmentModel& env) {
  Json nuclei = Json::array();
  for (const auto& c : env.nuclei) nuclei.push_back(coupling_to_json(c));
  return {{"b_field_gauss", env.b_field},
          {"gamma_c_khz_per_g", env.gamma_c},
          {"ms", env.ms},
          {"nsd", nsd_to_json(env.nsd)},
          {"nuclei", nuclei}};
}

EnvironmentModel env_from_json(const Json& j, const std::string& where) {
  EnvironmentModel env;
  env.b_field = number(j, "b_field_gauss", where);
  env.gamma_c = number_or(j, "gamma_c_khz_per_g", kDefaultGammaC, where);
  env.ms = j.contains("ms") ? integer(j, "ms", where) : -1;
  env.nsd = nsd_from_json(field(j, "nsd", where), where + ".nsd");
  if (j.contains("nuclei")) {
    const auto& arr = j["nuclei"];
    if (!arr.is_array()) throw InvalidArgument(where + ".nuclei: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      env.nuclei.push_back(coupling_from_json(arr[i], where + ".nuclei[" + std::to_string(i) + "]"));
  }
  checked(where, [&] { env.validate(); });
  return env;
}

Json sequence_spec_to_json(const SequenceSpec& spec) {
  Json j{{"family", std::string(to_string(spec.family))}};
  if (spec.n) j["n"] = *spec.n;
  if (spec.t1) j["t1_us"] = *spec.t1;
  if (spec.total_time) j["total_time_us"] = *spec.total_time;
  if (spec.r_m) j["r_m"] = *spec.r_m;
  if (spec.family == Family::custom) j["times_us"] = spec.times;
  return j;
}

SequenceSpec sequence_spec_from_json(const Json& j, const std::string& where) {
  SequenceSpec spec;
  const auto& fam = field(j, "family", where);
  if (!fam.is_string()) throw InvalidArgument(where + ".family: expected a string");
  checked(where + ".family", [&] { spec.family = parse_family(fam.get<std::string>()); });
  if (j.contains("n")) spec.n = integer(j, "n", where);
  if (j.contains("t1_us")) spec.t1 = number(j, "t1_us", where);
  if (j.contains("total_time_us")) spec.total_time = number(j, "total_time_us", where);
  if (j.contains("r_m")) spec.r_m = number(j, "r_m", where);
  if (j.contains("times_us")) spec.times = numbers(j, "times_us", where);
  checked(where, [&] { spec.build(); });
  return spec;
}

Json bath_to_json(const SpinBath& bath) {
  Json spins = Json::array();
  for (const auto& s : bath.spins) spins.push_back(coupling_to_json(s));
  return {{"omega0_khz", angular_to_khz(bath.omega0)}, {"seed", bath.seed}, {"spins", spins}};
}

SpinBath bath_from_json(const Json& j, const std::string& where) {
  const double omega0 = khz_to_angular(number(j, "omega0_khz", where));
  SpinBath bath;
  if (j.contains("random")) {
    const auto& r = j["random"];
    const std::string w = where + ".random";
    RandomBathOptions o;
    o.count = integer(r, "count", w);
    o.omega0 = omega0;
    o.ratio = number(r, "ratio", w);
    o.par_ratio = number_or(r, "par_ratio", -1.0, w);
    if (r.contains("fixed_magnitude")) {
      if (!r["fixed_magnitude"].is_boolean())
        throw InvalidArgument(w + ".fixed_magnitude: expected a boolean");
      o.fixed_magnitude = r["fixed_magnitude"].get<bool>();
    }
    if (r.contains("seed")) {
      if (!r["seed"].is_number_unsigned()) throw InvalidArgument(w + ".seed: expected an unsigned integer");
      o.seed = r["seed"].get<std::uint64_t>();
    }
    checked(w, [&] { bath = random_bath(o); });
  } else {
    bath.omega0 = omega0;
    const auto& arr = field(j, "spins", where);
    if (!arr.is_array()) throw InvalidArgument(where + ".spins: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      bath.spins.push_back(coupling_from_json(arr[i], where + ".spins[" + std::to_string(i) + "]"));
  }
  checked(where, [&] { bath.validate(); });
  return bath;
}

Json nsd_fit_to_json(const FitResult<GaussianNsd>& fit) {
  const Eigen::VectorXd e = fit.errors();
  return {{"nsd", nsd_to_json(fit.params)},
          {"errors",
           {{"y0", per_us_to_per_ms(e[0])},
            {"a", per_us_to_per_ms(e[1])},
            {"nu_l_khz", angular_to_khz(e[2])},
            {"sigma_khz", angular_to_khz(e[3])}}},
          {"chi_nu", fit.chi_nu},
          {"n_points", fit.n_points},
          {"iterations", fit.iterations},
          {"warnings", fit.warnings}};
}

Json coupling_fit_to_json(const FitResult<NuclearCoupling>& fit) {
  const Eigen::VectorXd e = fit.errors();
  Json j = coupling_to_json(fit.params);
  j["omega_par_err_khz"] = angular_to_khz(e[0]);
  j["omega_perp_err_khz"] = angular_to_khz(e[1]);
  j["chi_nu"] = fit.chi_nu;
  j["n_points"] = fit.n_points;
  j["warnings"] = fit.warnings;
  return j;
}

std::string trace_to_csv(const CoherenceTrace& trace, const Json* config) {
  std::ostringstream os;
  if (config) os << "# config: " << config->dump() << "\n";
  Json meta = Json::object();
  if (!trace.label.empty()) meta["label"] = trace.label;
  if (trace.r_m) meta["r_m"] = *trace.r_m;
  if (trace.harmonic_hint) meta["harmonic"] = *trace.harmonic_hint;
  if (!meta.empty()) os << "# trace: " << meta.dump() << "\n";
  os << "family,t1_us,n,total_time_us,p,sigma_p\n";
  const std::string fam(to_string(trace.family));
  const std::string t1 = trace.t1 ? format_double(*trace.t1) : "";
  for (const auto& r : trace.records)
    os << fam << ',' << t1 << ',' << r.n << ',' << format_double(r.total_time) << ','
       << format_double(r.p) << ',' << format_double(r.sigma_p) << '\n';
  return os.str();
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view s, const std::string& where) {
  s = trim(s);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw InvalidArgument(where + ": cannot parse '" + std::string(s) + "' as a number");
  return v;
}

int parse_int(std::string_view s, const std::string& where) {
  s = trim(s);
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw InvalidArgument(where + ": cannot parse '" + std::string(s) + "' as an integer");
  return v;
}

}  // namespace

CoherenceTrace trace_from_csv(std::string_view text, const std::string& source) {
  CoherenceTrace trace;
  bool header = false;
  bool have_family = false;
  int line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view tag = "# trace:";
      if (line.substr(0, tag.size()) == tag) {
        Json meta;
        try {
          meta = Json::parse(line.substr(tag.size()));
        } catch (const Json::exception& e) {
          throw InvalidArgument(where + ": bad trace metadata: " + e.what());
        }
        if (meta.contains("label") && meta["label"].is_string()) trace.label = meta["label"];
        if (meta.contains("r_m")) trace.r_m = number(meta, "r_m", where + " trace");
        if (meta.contains("harmonic")) trace.harmonic_hint = integer(meta, "harmonic", where + " trace");
      }
      continue;
    }
    if (!header) {
      if (line != "family,t1_us,n,total_time_us,p,sigma_p")
        throw InvalidArgument(where + ": expected header family,t1_us,n,total_time_us,p,sigma_p");
      header = true;
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != 6)
      throw InvalidArgument(where + ": expected 6 columns, got " + std::to_string(cols.size()));
    Family fam;
    checked(where + " family", [&] { fam = parse_family(trim(cols[0])); });
    if (have_family && fam != trace.family) throw InvalidArgument(where + ": family changes within a trace");
    trace.family = fam;
    have_family = true;
    if (!trim(cols[1]).empty()) {
      const double t1 = parse_double(cols[1], where + " t1_us");
      if (trace.t1 && *trace.t1 != t1) throw InvalidArgument(where + ": t1_us changes within a trace");
      trace.t1 = t1;
    }
    CoherenceRecord r;
    r.n = parse_int(cols[2], where + " n");
    r.total_time = parse_double(cols[3], where + " total_time_us");
    r.p = parse_double(cols[4], where + " p");
    r.sigma_p = parse_double(cols[5], where + " sigma_p");
    trace.records.push_back(r);
  }
  if (!header) throw InvalidArgument(source + ": no CSV header");
  if (trace.label.empty()) trace.label = fs::path(source).stem().string();
  checked(source, [&] { trace.validate(); });
  return trace;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

CoherenceTrace read_trace(const fs::path& path) { return trace_from_csv(read_text(path), path.string()); }

std::vector<CoherenceTrace> read_trace_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument(dir.string() + ": not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InvalidArgument(dir.string() + ": no .csv traces");
  std::vector<CoherenceTrace> out;
  for (const auto& f : files) out.push_back(read_trace(f));
  return out;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw InvalidArgument("write failed for " + path.string());
    }
  }
  fs::rename(tmp, path);
}

Json embedded_config(std::string_view csv_text) {
  constexpr std::string_view tag = "# config:";
  std::size_t start = 0;
  while (start < csv_text.size()) {
    auto end = csv_text.find('\n', start);
    if (end == std::string_view::npos) end = csv_text.size();
    const auto line = csv_text.substr(start, end - start);
    start = end + 1;
    if (line.substr(0, tag.size()) == tag) return Json::parse(line.substr(tag.size()));
    if (line.empty() || line.front() != '#') break;
  }
  return nullptr;
}

std::string config_hash(const Json& config) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ddspec
