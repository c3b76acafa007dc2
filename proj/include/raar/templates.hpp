#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace raar {

// Every prompt body the pipeline can send. Bodies live as data files,
// one per id, so they can be audited without reading code.
enum class TemplateId {
  kZeroShot,
  kFewShotRa,
  kSftRecord,
  kSubInitSentiment,
  kSubInitSemantic,
  kSubInitStyle,
  kSubDoubleCheck,
  kSubCommunication,
  kSubHint,
  kSumInit,
  kSumConsolidation,
  kSumReconsideration,
  kSumDiversification,
  kSumVerification,
  kSumRectification,
  kSumHint,
  kVerify,
  kRephrase,
  kRefine,
};

const std::vector<TemplateId>& all_template_ids();
const char* template_file_name(TemplateId id);

class TemplateRegistry {
 public:
  // Loads one body per id from dir and validates that the slot markers
  // found in each body are exactly the ones the pipeline fills.
  static TemplateRegistry load(const std::filesystem::path& dir);
  static TemplateRegistry load_default();

  const std::string& body(TemplateId id) const;

  // Slot markers as they appear in the body, in order of first occurrence.
  const std::vector<std::string>& slots(TemplateId id) const;

  // Byte-exact substitution of {slot} markers. All referenced slots must
  // be supplied, and nothing else.
  std::string render(TemplateId id, const std::map<std::string, std::string>& slots) const;

 private:
  std::map<TemplateId, std::string> bodies_;
  std::map<TemplateId, std::vector<std::string>> slots_;
};

// Markers of the form {identifier} in a template body, first-occurrence order.
std::vector<std::string> scan_slot_markers(const std::string& body);

}  // namespace raar
