#include "beatnet/eval.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>

namespace beatnet {

int64_t EvalReport::row_total(int truth) const {
  int64_t s = 0;
  for (int j = 0; j < n_classes; ++j) s += at(truth, j);
  return s;
}

int64_t EvalReport::col_total(int pred) const {
  int64_t s = 0;
  for (int i = 0; i < n_classes; ++i) s += at(i, pred);
  return s;
}

double EvalReport::accuracy() const {
  if (n == 0) return 0.0;
  int64_t hit = 0;
  for (int c = 0; c < n_classes; ++c) hit += at(c, c);
  return static_cast<double>(hit) / static_cast<double>(n);
}

double EvalReport::precision(int c) const {
  const int64_t denom = col_total(c);
  return denom == 0 ? 0.0 : static_cast<double>(at(c, c)) / static_cast<double>(denom);
}

double EvalReport::recall(int c) const {
  const int64_t denom = row_total(c);
  return denom == 0 ? 0.0 : static_cast<double>(at(c, c)) / static_cast<double>(denom);
}

double EvalReport::macro_precision() const {
  if (n_classes == 0) return 0.0;
  double s = 0.0;
  for (int c = 0; c < n_classes; ++c) s += precision(c);
  return s / n_classes;
}

double EvalReport::macro_recall() const {
  if (n_classes == 0) return 0.0;
  double s = 0.0;
  for (int c = 0; c < n_classes; ++c) s += recall(c);
  return s / n_classes;
}

MiMetrics report_mi_metrics(const EvalReport& report) {
  if (report.n_classes != 2)
    throw ValueError("MI metrics need a 2-class report, got " +
                     std::to_string(report.n_classes) + " classes");
  MiMetrics m;
  m.accuracy = report.accuracy();
  m.precision = report.precision(1);
  m.recall = report.recall(1);
  return m;
}

namespace {

const char* label_name(Task task, int c) {
  return task == Task::Arrhythmia ? arrhythmia_class_names()[static_cast<size_t>(c)]
                                  : mi_class_names()[static_cast<size_t>(c)];
}

}  // namespace

void write_report_text(const EvalReport& report, Task task, std::ostream& os) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "samples: %lld\n", static_cast<long long>(report.n));
  os << buf;
  std::snprintf(buf, sizeof(buf), "accuracy: %.4f\n", report.accuracy());
  os << buf;
  std::snprintf(buf, sizeof(buf), "macro precision: %.4f\nmacro recall: %.4f\n\n",
                report.macro_precision(), report.macro_recall());
  os << buf;

  os << "class  precision  recall    support\n";
  for (int c = 0; c < report.n_classes; ++c) {
    std::snprintf(buf, sizeof(buf), "%-5s  %9.4f  %6.4f  %9lld\n", label_name(task, c),
                  report.precision(c), report.recall(c),
                  static_cast<long long>(report.row_total(c)));
    os << buf;
  }

  os << "\nconfusion (rows = true, columns = predicted)\n      ";
  for (int j = 0; j < report.n_classes; ++j) {
    std::snprintf(buf, sizeof(buf), "%9s", label_name(task, j));
    os << buf;
  }
  os << "\n";
  for (int i = 0; i < report.n_classes; ++i) {
    std::snprintf(buf, sizeof(buf), "%-5s ", label_name(task, i));
    os << buf;
    for (int j = 0; j < report.n_classes; ++j) {
      std::snprintf(buf, sizeof(buf), "%9lld", static_cast<long long>(report.at(i, j)));
      os << buf;
    }
    os << "\n";
  }

  if (task == Task::Mi) {
    const MiMetrics m = report_mi_metrics(report);
    std::snprintf(buf, sizeof(buf),
                  "\nMI positive class: accuracy %.4f, precision %.4f, recall %.4f\n",
                  m.accuracy, m.precision, m.recall);
    os << buf;
  }
}

void write_report_csv(const EvalReport& report, Task task, std::ostream& os) {
  char buf[160];
  os << "key,class,value\n";
  std::snprintf(buf, sizeof(buf), "samples,,%lld\n", static_cast<long long>(report.n));
  os << buf;
  std::snprintf(buf, sizeof(buf), "accuracy,,%.9g\n", report.accuracy());
  os << buf;
  std::snprintf(buf, sizeof(buf), "macro_precision,,%.9g\n", report.macro_precision());
  os << buf;
  std::snprintf(buf, sizeof(buf), "macro_recall,,%.9g\n", report.macro_recall());
  os << buf;
  for (int c = 0; c < report.n_classes; ++c) {
    std::snprintf(buf, sizeof(buf), "precision,%s,%.9g\n", label_name(task, c),
                  report.precision(c));
    os << buf;
    std::snprintf(buf, sizeof(buf), "recall,%s,%.9g\n", label_name(task, c),
                  report.recall(c));
    os << buf;
    std::snprintf(buf, sizeof(buf), "support,%s,%lld\n", label_name(task, c),
                  static_cast<long long>(report.row_total(c)));
    os << buf;
  }
  for (int i = 0; i < report.n_classes; ++i)
    for (int j = 0; j < report.n_classes; ++j) {
      std::snprintf(buf, sizeof(buf), "confusion,%s:%s,%lld\n", label_name(task, i),
                    label_name(task, j), static_cast<long long>(report.at(i, j)));
      os << buf;
    }
}

void write_report_files(const EvalReport& report, Task task, const std::string& text_path,
                        const std::string& csv_path) {
  {
    std::ofstream f(text_path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + text_path + "' for writing");
    write_report_text(report, task, f);
    if (!f) throw IoError("short write to '" + text_path + "'");
  }
  {
    std::ofstream f(csv_path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + csv_path + "' for writing");
    write_report_csv(report, task, f);
    if (!f) throw IoError("short write to '" + csv_path + "'");
  }
}

void export_embeddings_impl(const std::vector<Beat>& beats, const float* embeddings,
                            int dim, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  for (int d = 0; d < dim; ++d) f << "e" << d << ",";
  f << "label\n";
  char num[40];
  std::string line;
  for (size_t i = 0; i < beats.size(); ++i) {
    if (!beats[i].label) throw ValueError("beat '" + beats[i].id + "' has no label");
    line.clear();
    for (int d = 0; d < dim; ++d) {
      std::snprintf(num, sizeof(num), "%.9g,",
                    static_cast<double>(embeddings[i * static_cast<size_t>(dim) + d]));
      line += num;
    }
    line += std::to_string(*beats[i].label);
    line += "\n";
    f << line;
  }
  if (!f) throw IoError("short write to '" + path + "'");
}

}  // namespace beatnet
