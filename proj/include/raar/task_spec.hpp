#pragma once

#include <string>
#include <vector>

namespace raar {

// One detection task: its canonical label vocabulary and the task
// description sentence the prompts embed verbatim.
struct TaskSpec {
  std::string name;
  std::vector<std::string> label_set;
  std::string task_description;

  // Known tasks: AMTCele, PHEME, COCO.
  static const TaskSpec& by_name(const std::string& name);
  static const std::vector<TaskSpec>& all();

  bool is_canonical(const std::string& label) const;
};

}  // namespace raar
