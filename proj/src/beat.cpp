#include "beatnet/beat.hpp"

#include "beatnet/errors.hpp"

namespace beatnet {

const std::array<const char*, 5>& arrhythmia_class_names() {
  static const std::array<const char*, 5> names = {"N", "S", "V", "F", "Q"};
  return names;
}

const std::array<const char*, 2>& mi_class_names() {
  static const std::array<const char*, 2> names = {"HC", "MI"};
  return names;
}

const char* class_name(Task t, int label) {
  if (label < 0 || label >= n_classes(t))
    throw ValueError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(n_classes(t)) + " classes");
  return t == Task::Arrhythmia ? arrhythmia_class_names()[static_cast<size_t>(label)]
                               : mi_class_names()[static_cast<size_t>(label)];
}

}  // namespace beatnet
