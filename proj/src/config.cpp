#include "perfrac/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "perfrac/error.hpp"

namespace perfrac {

namespace {

struct Invalid {
  std::string key;
  std::string message;
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

// Value parsers throw Invalid with an empty key; the caller fills it in.
double to_double(std::string_view s) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(x))
    throw Invalid{"", "expected a finite number, got '" + std::string(s) + "'"};
  return x;
}

int to_int(std::string_view s) {
  int x = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw Invalid{"", "expected an integer, got '" + std::string(s) + "'"};
  return x;
}

bool to_bool(std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw Invalid{"", "expected true or false, got '" + std::string(s) + "'"};
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, double>)
      out += format_number(xs[i]);
    else
      out += std::to_string(xs[i]);
  }
  return out;
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PERFRAC_NUMBER(key, field)                                              \
  Key {                                                                          \
    key, [](RunConfig& c, std::string_view v) { c.field = to_double(v); },       \
        [](const RunConfig& c) { return format_number(c.field); }               \
  }
#define PERFRAC_INT(key, field)                                                 \
  Key {                                                                          \
    key, [](RunConfig& c, std::string_view v) { c.field = to_int(v); },          \
        [](const RunConfig& c) { return std::to_string(c.field); }              \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      PERFRAC_NUMBER("geometry.r", cell.radius),
      PERFRAC_INT("geometry.n", cell.resolution),
      PERFRAC_NUMBER("geometry.ax", domain.ax),
      PERFRAC_NUMBER("geometry.bx", domain.bx),
      PERFRAC_NUMBER("geometry.ay", domain.ay),
      PERFRAC_NUMBER("geometry.by", domain.by),
      PERFRAC_INT("geometry.macro_n", domain.resolution),
      PERFRAC_NUMBER("geometry.epsilon", epsilon),
      PERFRAC_NUMBER("model.gamma", model.gamma),
      PERFRAC_NUMBER("model.eta", model.eta),
      PERFRAC_INT("model.steps", model.steps),
      PERFRAC_NUMBER("model.altmin_tol", model.altmin_tol),
      PERFRAC_INT("model.altmin_max_iters", model.altmin_max_iters),
      PERFRAC_NUMBER("model.solver_tol", model.solver_tol),
      PERFRAC_NUMBER("model.kkt_tol", model.kkt_tol),
      PERFRAC_NUMBER("model.relaxation", model.relaxation),
      {"model.freeze_v", [](RunConfig& c, std::string_view v) { c.model.freeze_v = to_bool(v); },
       [](const RunConfig& c) { return std::string(c.model.freeze_v ? "true" : "false"); }},
      {"model.m0",
       [](RunConfig& c, std::string_view v) {
         if (v == "cell")
           c.m0_scalar.reset();
         else
           c.m0_scalar = to_double(v);
       },
       [](const RunConfig& c) { return c.m0_scalar ? format_number(*c.m0_scalar) : std::string("cell"); }},
      {"load.program", [](RunConfig& c, std::string_view v) { c.load_program = std::string(v); },
       [](const RunConfig& c) { return c.load_program; }},
      PERFRAC_NUMBER("load.amplitude", load_amplitude),
      PERFRAC_NUMBER("load.offset", load_offset),
      {"run.mode", [](RunConfig& c, std::string_view v) { c.mode = parse_mode(v); },
       [](const RunConfig& c) { return to_string(c.mode); }},
      {"run.out",
       [](RunConfig& c, std::string_view v) {
         if (v.empty()) throw Invalid{"", "empty output directory"};
         c.out_dir = std::string(v);
       },
       [](const RunConfig& c) { return c.out_dir; }},
      PERFRAC_INT("run.vtk_stride", vtk_stride),
      {"run.notch",
       [](RunConfig& c, std::string_view v) {
         if (v == "none") {
           c.notch.reset();
           return;
         }
         const auto parts = split_list(v);
         if (parts.size() != 4) throw Invalid{"", "expected 'none' or four numbers x0, y0, x1, y1"};
         c.notch = std::array<double, 4>{to_double(parts[0]), to_double(parts[1]), to_double(parts[2]),
                                         to_double(parts[3])};
       },
       [](const RunConfig& c) {
         return c.notch ? join(std::vector<double>(c.notch->begin(), c.notch->end())) : std::string("none");
       }},
      {"validate.epsilons",
       [](RunConfig& c, std::string_view v) {
         c.validate_epsilons.clear();
         for (auto part : split_list(v)) c.validate_epsilons.push_back(to_double(part));
       },
       [](const RunConfig& c) { return join(c.validate_epsilons); }},
      PERFRAC_INT("validate.cell_n", validate_cell_n),
      PERFRAC_INT("validate.steps", validate_steps),
      PERFRAC_NUMBER("validate.amplitude", validate_amplitude),
      {"mms.levels",
       [](RunConfig& c, std::string_view v) {
         c.mms_levels.clear();
         for (auto part : split_list(v)) c.mms_levels.push_back(to_int(part));
       },
       [](const RunConfig& c) { return join(c.mms_levels); }},
  };
  return table;
}

#undef PERFRAC_NUMBER
#undef PERFRAC_INT

bool tiles(const MacroDomain& dom, double eps) {
  try {
    tile_counts(dom, eps);
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::optional<Invalid> check(const RunConfig& c) {
  const auto bad = [](const char* key, const std::string& msg) { return std::optional<Invalid>(Invalid{key, msg}); };
  if (!(c.cell.radius >= 0.0 && c.cell.radius < 0.5)) return bad("geometry.r", "must satisfy 0 <= r < 0.5");
  if (c.cell.resolution < 4) return bad("geometry.n", "must be at least 4");
  if (!(c.domain.bx > c.domain.ax)) return bad("geometry.bx", "must exceed geometry.ax");
  if (!(c.domain.by > c.domain.ay)) return bad("geometry.by", "must exceed geometry.ay");
  if (c.domain.resolution < 2) return bad("geometry.macro_n", "must be at least 2");
  if (!(c.epsilon > 0.0) || !tiles(c.domain, c.epsilon))
    return bad("geometry.epsilon", "must be positive and tile the domain with whole cells");
  if (!(c.model.gamma > 0.0)) return bad("model.gamma", "must be positive");
  if (!(c.model.eta > 0.0 && c.model.eta < c.model.gamma)) return bad("model.eta", "must satisfy 0 < eta < gamma");
  if (c.model.steps < 1) return bad("model.steps", "must be at least 1");
  if (!(c.model.altmin_tol > 0.0)) return bad("model.altmin_tol", "must be positive");
  if (c.model.altmin_max_iters < 1) return bad("model.altmin_max_iters", "must be at least 1");
  if (!(c.model.solver_tol > 0.0)) return bad("model.solver_tol", "must be positive");
  if (!(c.model.kkt_tol > 0.0)) return bad("model.kkt_tol", "must be positive");
  if (!(c.model.relaxation == 0.0 || (c.model.relaxation > 0.0 && c.model.relaxation < 2.0)))
    return bad("model.relaxation", "must be 0 (automatic) or in (0, 2)");
  if (c.m0_scalar && !(*c.m0_scalar > 0.0)) return bad("model.m0", "must be 'cell' or a positive number");
  static const char* programs[] = {"zero", "uniaxial", "shear", "surfing"};
  if (std::find(std::begin(programs), std::end(programs), c.load_program) == std::end(programs))
    return bad("load.program", "unknown program '" + c.load_program + "' (zero, uniaxial, shear, surfing)");
  if (c.vtk_stride < 0) return bad("run.vtk_stride", "must be nonnegative");
  if (c.validate_epsilons.empty()) return bad("validate.epsilons", "must list at least one value");
  for (double e : c.validate_epsilons)
    if (!(e > 0.0) || !tiles(c.domain, e))
      return bad("validate.epsilons", "value " + format_number(e) + " does not tile the domain");
  if (c.validate_cell_n < 4) return bad("validate.cell_n", "must be at least 4");
  if (c.validate_steps < 1) return bad("validate.steps", "must be at least 1");
  if (c.mms_levels.size() < 2) return bad("mms.levels", "must list at least two resolutions");
  for (std::size_t i = 0; i < c.mms_levels.size(); ++i)
    if (c.mms_levels[i] < 2 || (i > 0 && c.mms_levels[i] <= c.mms_levels[i - 1]))
      return bad("mms.levels", "must be increasing resolutions of at least 2");
  return std::nullopt;
}

}  // namespace

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::Cell: return "cell";
    case RunMode::HomogRun: return "homog-run";
    case RunMode::FineRun: return "fine-run";
    case RunMode::Validate: return "validate";
    case RunMode::Mms: return "mms";
  }
  return "unknown";
}

RunMode parse_mode(std::string_view text) {
  for (RunMode m : {RunMode::Cell, RunMode::HomogRun, RunMode::FineRun, RunMode::Validate, RunMode::Mms})
    if (to_string(m) == text) return m;
  throw Error(ErrorCode::ParseError, "unknown mode '" + std::string(text) + "'");
}

LoadProgram RunConfig::load() const {
  if (load_program == "zero") return LoadProgram::zero();
  if (load_program == "uniaxial") return LoadProgram::uniaxial(load_amplitude);
  if (load_program == "shear") return LoadProgram::shear(load_amplitude);
  if (load_program == "surfing") return LoadProgram::surfing(load_amplitude, load_offset);
  throw Error(ErrorCode::ValidationError, "load.program: unknown program '" + load_program + "'");
}

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  std::map<std::string, int, std::less<>> seen;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto where = [&](const std::string& what) { return "line " + std::to_string(line_no) + ": " + what; };
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::ParseError, where("expected 'section.key = value'"));
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = std::find_if(keys().begin(), keys().end(), [&](const Key& k) { return key == k.name; });
    if (it == keys().end()) throw Error(ErrorCode::ParseError, where("unknown key '" + std::string(key) + "'"));
    if (seen.count(key)) throw Error(ErrorCode::ParseError, where("repeated key '" + std::string(key) + "'"));
    seen.emplace(std::string(key), line_no);
    try {
      it->set(config, value);
    } catch (const Invalid& e) {
      throw Error(ErrorCode::ParseError, where(std::string(key) + ": " + e.message));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, where(std::string(key) + ": " + e.what()));
    }
  }
  if (const auto bad = check(config)) {
    const auto it = seen.find(bad->key);
    const std::string prefix = it == seen.end() ? std::string("default value of ")
                                                : "line " + std::to_string(it->second) + ": ";
    throw Error(ErrorCode::ValidationError, prefix + bad->key + " " + bad->message);
  }
  return config;
}

void validate_config(const RunConfig& config) {
  if (const auto bad = check(config)) throw Error(ErrorCode::ValidationError, bad->key + " " + bad->message);
}

std::string serialize_config(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const Key& k : keys()) {
    const std::string name = k.name;
    const std::string sec = name.substr(0, name.find('.'));
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << "# " << sec << '\n';
      section = sec;
    }
    out << name << " = " << k.get(config) << '\n';
  }
  return out.str();
}

std::string format_number(double x) {
  if (x == 0.0) x = 0.0;  // drop the sign of negative zero
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return {buf, res.ptr};
}

std::string format_csv(double x) {
  if (x == 0.0) x = 0.0;
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return {buf, res.ptr};
}

}  // namespace perfrac
