#ifndef STANCE_EXTERNAL_ADAPTER_H_
#define STANCE_EXTERNAL_ADAPTER_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stance/corpus.h"
#include "stance/labels.h"

namespace stance {

struct ExternalPredictionSet {
  std::string model;
  std::string topic;
  std::map<std::string, StanceLabel> labels;
  std::string provenance;

  // Labels ordered like ds.test, ready for the evaluation module.
  std::vector<StanceLabel> in_test_order(const TopicDataset& ds) const;
};

// Reads "post_id<TAB>label" rows and checks they cover ds.test exactly.
// Comment lines of the form "# model=NAME" or "# provenance=TEXT" fill the
// corresponding fields; otherwise the model name is the file stem.
// Missing ids raise a ValidationError listing all of them; unknown ids,
// duplicates and bad labels raise a ParseError at the offending line.
ExternalPredictionSet import_predictions(const std::filesystem::path& path,
                                         const TopicDataset& ds);

}  // namespace stance

#endif  // STANCE_EXTERNAL_ADAPTER_H_
