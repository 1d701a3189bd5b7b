#include "tubeground/types.hpp"

#include "tubeground/errors.hpp"

namespace tubeground {

double Tubelet::mean_confidence() const {
  if (confidences.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [frame, conf] : confidences) sum += conf;
  return sum / static_cast<double>(confidences.size());
}

bool Tubelet::consistent() const {
  if (start_frame >= end_frame) return false;
  const auto n = static_cast<std::size_t>(end_frame - start_frame);
  if (boxes.size() != n || confidences.size() != n || features.size() != n) return false;
  for (std::int64_t f = start_frame; f < end_frame; ++f) {
    if (!boxes.count(f) || !confidences.count(f) || !features.count(f)) return false;
  }
  return true;
}

bool GroundTruth::consistent() const {
  if (t_start >= t_end) return false;
  for (std::int64_t f = t_start; f < t_end; ++f) {
    if (!target_boxes.count(f)) return false;
  }
  return true;
}

std::string to_string(PosTag tag) {
  switch (tag) {
    case PosTag::Noun: return "NOUN";
    case PosTag::Adj: return "ADJ";
    case PosTag::Verb: return "VERB";
    case PosTag::Other: return "OTHER";
  }
  return "OTHER";
}

PosTag pos_tag_from_string(const std::string& s) {
  if (s == "NOUN") return PosTag::Noun;
  if (s == "ADJ") return PosTag::Adj;
  if (s == "VERB") return PosTag::Verb;
  if (s == "OTHER") return PosTag::Other;
  throw DataError("unknown POS tag: " + s);
}

}  // namespace tubeground
