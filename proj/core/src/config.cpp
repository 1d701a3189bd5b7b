#include "tubeground/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tubeground/errors.hpp"
#include "tubeground/log.hpp"

namespace tubeground {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& section, const std::string& key,
                    const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("[" + section + "] " + key + ": not a number: " + value);
  }
}

std::int64_t parse_int(const std::string& section, const std::string& key,
                       const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("[" + section + "] " + key + ": not an integer: " + value);
  }
}

bool parse_bool(const std::string& section, const std::string& key,
                const std::string& value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigError("[" + section + "] " + key + ": not a boolean: " + value);
}

std::vector<std::optional<std::int64_t>> parse_bounds(const std::string& value) {
  std::vector<std::optional<std::int64_t>> out;
  std::stringstream ss(value);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    if (part == "inf" || part == "all" || part == "*") {
      out.push_back(std::nullopt);
    } else {
      out.push_back(parse_int("sps", "bounds", part));
    }
  }
  if (out.empty() || out.back().has_value()) out.push_back(std::nullopt);
  return out;
}

std::string bounds_to_string(const std::vector<std::optional<std::int64_t>>& bounds) {
  std::string s;
  for (const auto& b : bounds) {
    if (!s.empty()) s += ",";
    s += b ? std::to_string(*b) : "inf";
  }
  return s;
}

}  // namespace

IniDoc IniDoc::parse(const std::string& text) {
  IniDoc doc;
  std::istringstream is(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
      }
      section = trim(line.substr(1, line.size() - 2));
      doc.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    }
    doc.sections_[section][key] = value;
  }
  return doc;
}

IniDoc IniDoc::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buffer;
  buffer << is.rdbuf();
  return parse(buffer.str());
}

std::optional<std::string> IniDoc::get(const std::string& section,
                                       const std::string& key) const {
  const auto sit = sections_.find(section);
  if (sit == sections_.end()) return std::nullopt;
  const auto kit = sit->second.find(key);
  if (kit == sit->second.end()) return std::nullopt;
  return kit->second;
}

RunConfig RunConfig::defaults_for_dims(std::size_t tubelet_dim, std::size_t clip_dim,
                                       std::size_t word_dim) {
  RunConfig cfg;
  cfg.spatial.tubelet_dim = tubelet_dim;
  cfg.spatial.word_dim = word_dim;
  cfg.temporal.clip_dim = clip_dim;
  cfg.temporal.word_dim = word_dim;
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  return from_ini(IniDoc::from_file(path));
}

RunConfig RunConfig::from_ini(const IniDoc& doc) {
  RunConfig cfg;
  cfg.apply_ini(doc);
  return cfg;
}

void RunConfig::apply_ini(const IniDoc& doc) {
  for (const auto& [section, kvs] : doc.sections()) {
    for (const auto& [key, value] : kvs) {
      if (section == "plan") {
        if (key == "total_epochs") plan.total_epochs = parse_int(section, key, value);
        else if (key == "total_steps") plan.total_steps = parse_int(section, key, value);
        else if (key == "batch_size") plan.batch_size = parse_int(section, key, value);
        else if (key == "seed") plan.seed = static_cast<std::uint64_t>(parse_int(section, key, value));
        else if (key == "use_crg") plan.use_crg = parse_bool(section, key, value);
        else if (key == "max_tubelets") plan.max_tubelets = parse_int(section, key, value);
        else if (key == "frame_samples") plan.frame_samples = parse_int(section, key, value);
        else throw ConfigError("[plan] unknown key: " + key);
      } else if (section == "sps") {
        if (key == "enabled") plan.sps_enabled = parse_bool(section, key, value);
        else if (key == "bounds") plan.stage_bounds = parse_bounds(value);
        else throw ConfigError("[sps] unknown key: " + key);
      } else if (section == "spatial") {
        if (key == "lr") plan.spatial_lr = parse_double(section, key, value);
        else if (key == "tubelet_dim") spatial.tubelet_dim = static_cast<std::size_t>(parse_int(section, key, value));
        else if (key == "word_dim") spatial.word_dim = static_cast<std::size_t>(parse_int(section, key, value));
        else if (key == "proj_dim") spatial.proj_dim = static_cast<std::size_t>(parse_int(section, key, value));
        else if (key == "hidden_dim") spatial.hidden_dim = static_cast<std::size_t>(parse_int(section, key, value));
        else if (key == "seed") spatial.seed = static_cast<std::uint64_t>(parse_int(section, key, value));
        else if (key == "normalize_compat") spatial.normalize_compat = parse_bool(section, key, value);
        else if (key == "temperature") spatial.temperature = parse_double(section, key, value);
        else if (key == "word_projection") {
          if (value == "auto") spatial.word_projection = SpatialConfig::WordProjection::Auto;
          else if (value == "shared") spatial.word_projection = SpatialConfig::WordProjection::Shared;
          else if (value == "separate") spatial.word_projection = SpatialConfig::WordProjection::Separate;
          else throw ConfigError("[spatial] word_projection must be auto|shared|separate");
        } else if (key == "negatives") {
          if (value == "cross_video") spatial.negatives = SpatialConfig::Negatives::CrossVideo;
          else if (value == "within_video") spatial.negatives = SpatialConfig::Negatives::WithinVideo;
          else throw ConfigError("[spatial] negatives must be cross_video|within_video");
        } else if (key == "denominator") {
          if (value == "exclusive") spatial.denominator = SpatialConfig::Denominator::Exclusive;
          else if (value == "inclusive") spatial.denominator = SpatialConfig::Denominator::Inclusive;
          else throw ConfigError("[spatial] denominator must be exclusive|inclusive");
        } else {
          throw ConfigError("[spatial] unknown key: " + key);
        }
      } else if (section == "temporal") {
        if (key == "lr") plan.temporal_lr = parse_double(section, key, value);
        else if (key == "clip_dim") temporal.clip_dim = static_cast<std::size_t>(parse_int(section, key, value));
        else if (key == "word_dim") temporal.word_dim = static_cast<std::size_t>(parse_int(section, key, value));
        else if (key == "model_dim") temporal.model_dim = static_cast<std::size_t>(parse_int(section, key, value));
        else if (key == "hidden_dim") temporal.hidden_dim = static_cast<std::size_t>(parse_int(section, key, value));
        else if (key == "max_words") temporal.max_words = static_cast<std::size_t>(parse_int(section, key, value));
        else if (key == "decoder_blocks") temporal.decoder_blocks = static_cast<std::size_t>(parse_int(section, key, value));
        else if (key == "clip_len") temporal.clip_len = parse_int(section, key, value);
        else if (key == "tau") temporal.tau = parse_double(section, key, value);
        else if (key == "score_all_positions") temporal.score_all_positions = parse_bool(section, key, value);
        else if (key == "seed") temporal.seed = static_cast<std::uint64_t>(parse_int(section, key, value));
        else throw ConfigError("[temporal] unknown key: " + key);
      } else if (section == "linker") {
        if (key == "new_track_threshold") linker.new_track_threshold = parse_double(section, key, value);
        else if (key == "low_track_threshold") linker.low_track_threshold = parse_double(section, key, value);
        else if (key == "high_track_threshold") linker.high_track_threshold = parse_double(section, key, value);
        else if (key == "matching_iou_threshold") linker.matching_iou_threshold = parse_double(section, key, value);
        else if (key == "appearance_threshold") {
          linker.appearance_threshold = parse_double(section, key, value);
          logging::warn("appearance_threshold is parsed but ignored: re-identification "
                        "is not part of the geometric linker");
        } else if (key == "buffer_frames") linker.buffer_frames = parse_int(section, key, value);
        else if (key == "detection_stride") linker.detection_stride = parse_int(section, key, value);
        else throw ConfigError("[linker] unknown key: " + key);
      } else {
        throw ConfigError("unknown config section: [" + section + "]");
      }
    }
  }
  linker.validate();
}

std::string RunConfig::echo() const {
  std::ostringstream os;
  os.precision(17);
  os << "[plan]\n";
  os << "total_epochs = " << plan.total_epochs << "\n";
  if (plan.total_steps) os << "total_steps = " << *plan.total_steps << "\n";
  os << "batch_size = " << plan.batch_size << "\n";
  os << "seed = " << plan.seed << "\n";
  os << "use_crg = " << (plan.use_crg ? "true" : "false") << "\n";
  os << "max_tubelets = " << plan.max_tubelets << "\n";
  os << "frame_samples = " << plan.frame_samples << "\n";
  os << "\n[sps]\n";
  os << "enabled = " << (plan.sps_enabled ? "true" : "false") << "\n";
  os << "bounds = " << bounds_to_string(plan.stage_bounds) << "\n";
  os << "\n[spatial]\n";
  os << "lr = " << plan.spatial_lr << "\n";
  os << "tubelet_dim = " << spatial.tubelet_dim << "\n";
  os << "word_dim = " << spatial.word_dim << "\n";
  os << "proj_dim = " << spatial.proj_dim << "\n";
  os << "hidden_dim = " << spatial.hidden_dim << "\n";
  os << "seed = " << spatial.seed << "\n";
  os << "normalize_compat = " << (spatial.normalize_compat ? "true" : "false") << "\n";
  os << "temperature = " << spatial.temperature << "\n";
  os << "word_projection = "
     << (spatial.word_projection == SpatialConfig::WordProjection::Auto     ? "auto"
         : spatial.word_projection == SpatialConfig::WordProjection::Shared ? "shared"
                                                                            : "separate")
     << "\n";
  os << "negatives = "
     << (spatial.negatives == SpatialConfig::Negatives::CrossVideo ? "cross_video"
                                                                   : "within_video")
     << "\n";
  os << "denominator = "
     << (spatial.denominator == SpatialConfig::Denominator::Exclusive ? "exclusive"
                                                                      : "inclusive")
     << "\n";
  os << "\n[temporal]\n";
  os << "lr = " << plan.temporal_lr << "\n";
  os << "clip_dim = " << temporal.clip_dim << "\n";
  os << "word_dim = " << temporal.word_dim << "\n";
  os << "model_dim = " << temporal.model_dim << "\n";
  os << "hidden_dim = " << temporal.hidden_dim << "\n";
  os << "max_words = " << temporal.max_words << "\n";
  os << "decoder_blocks = " << temporal.decoder_blocks << "\n";
  os << "clip_len = " << temporal.clip_len << "\n";
  os << "tau = " << temporal.tau << "\n";
  os << "score_all_positions = " << (temporal.score_all_positions ? "true" : "false") << "\n";
  os << "seed = " << temporal.seed << "\n";
  os << "\n[linker]\n";
  os << "new_track_threshold = " << linker.new_track_threshold << "\n";
  os << "low_track_threshold = " << linker.low_track_threshold << "\n";
  os << "high_track_threshold = " << linker.high_track_threshold << "\n";
  os << "matching_iou_threshold = " << linker.matching_iou_threshold << "\n";
  os << "appearance_threshold = " << linker.appearance_threshold << "\n";
  os << "buffer_frames = " << linker.buffer_frames << "\n";
  os << "detection_stride = " << linker.detection_stride << "\n";
  return os.str();
}

}  // namespace tubeground
