#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "tubeground/linker.hpp"
#include "tubeground/spatial.hpp"
#include "tubeground/temporal.hpp"
#include "tubeground/trainer.hpp"

namespace tubeground {

/// Minimal INI reader: [section] headers, key = value pairs, '#' and ';'
/// comments. Unknown keys are rejected by the consumers to catch typos.
class IniDoc {
 public:
  static IniDoc parse(const std::string& text);
  static IniDoc from_file(const std::filesystem::path& path);

  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

/// Everything a run needs, mapped onto sections [plan], [spatial],
/// [temporal], [linker], [sps]. Every default is overridable and echo()
/// serializes the full effective state.
struct RunConfig {
  TrainPlan plan;
  SpatialConfig spatial;
  TemporalConfig temporal;
  LinkerConfig linker;

  static RunConfig defaults_for_dims(std::size_t tubelet_dim, std::size_t clip_dim,
                                     std::size_t word_dim);
  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_ini(const IniDoc& doc);

  void apply_ini(const IniDoc& doc);
  std::string echo() const;
};

}  // namespace tubeground
