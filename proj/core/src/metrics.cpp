#include "fetalchd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>

namespace fetalchd::metrics {

Prf precision_recall_f1(const std::vector<int>& predicted,
                        const std::vector<int>& labels, int positive_class) {
  if (predicted.size() != labels.size())
    throw std::invalid_argument("precision_recall_f1: length mismatch");
  if (predicted.empty())
    throw std::invalid_argument("precision_recall_f1: empty input");
  int tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool pred_pos = predicted[i] == positive_class;
    const bool is_pos = labels[i] == positive_class;
    if (pred_pos && is_pos) ++tp;
    else if (pred_pos) ++fp;
    else if (is_pos) ++fn;
  }
  Prf out;
  if (tp + fp == 0) {
    out.precision_defined = false;
  } else {
    out.precision = static_cast<double>(tp) / (tp + fp);
  }
  if (tp + fn == 0) {
    out.recall_defined = false;
  } else {
    out.recall = static_cast<double>(tp) / (tp + fn);
  }
  if (out.precision + out.recall == 0) {
    out.f1_defined = false;
  } else {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_auc: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += l == 1 ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("roc_auc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // midranks over tie groups, 1-based
  double rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  return (rank_sum_pos - np * (np + 1) / 2.0) /
         (np * static_cast<double>(n_neg));
}

EvalReport evaluate_frames(const std::vector<EvalFrame>& frames,
                           const std::string& stratum_name, bool patient_level) {
  EvalReport report;
  report.stratum = stratum_name;
  report.n_frames = static_cast<int>(frames.size());
  for (const EvalFrame& f : frames) report.n_retained += f.retained ? 1 : 0;
  if (frames.empty()) return report;

  std::vector<int> pred, label;
  std::vector<double> score;
  pred.reserve(frames.size());
  for (const EvalFrame& f : frames) {
    pred.push_back(f.predicted);
    label.push_back(f.label);
    score.push_back(f.hlhs_prob);
  }
  report.nc = precision_recall_f1(pred, label, 0);
  report.chd = precision_recall_f1(pred, label, 1);
  const bool both =
      std::count(label.begin(), label.end(), 1) > 0 &&
      std::count(label.begin(), label.end(), 0) > 0;
  if (both) {
    report.roc_auc = roc_auc(score, label);
    report.auc_defined = true;
  }

  if (patient_level) {
    const auto patients = aggregate_patient(frames);
    std::map<int, int> patient_label;
    for (const EvalFrame& f : frames) patient_label[f.patient_id] = f.label;
    std::vector<double> pscore;
    std::vector<int> plabel;
    for (const PatientScore& p : patients) {
      if (!p.score) continue;
      pscore.push_back(*p.score);
      plabel.push_back(patient_label[p.patient_id]);
    }
    if (std::count(plabel.begin(), plabel.end(), 1) > 0 &&
        std::count(plabel.begin(), plabel.end(), 0) > 0)
      report.patient_auc = roc_auc(pscore, plabel);
  }
  return report;
}

std::vector<EvalReport> stratified_report(const std::vector<EvalFrame>& frames,
                                          bool patient_level) {
  auto subset = [&](auto keep) {
    std::vector<EvalFrame> out;
    for (const EvalFrame& f : frames)
      if (keep(f)) out.push_back(f);
    return out;
  };
  std::vector<EvalReport> reports;
  reports.push_back(
      evaluate_frames(frames, "Low+Med+High", patient_level));
  reports.push_back(evaluate_frames(
      subset([](const EvalFrame& f) { return f.quality != Quality::Low; }),
      "Med+High", patient_level));
  reports.push_back(evaluate_frames(
      subset([](const EvalFrame& f) { return f.quality == Quality::High; }),
      "High", patient_level));
  reports.push_back(evaluate_frames(
      subset([](const EvalFrame& f) { return f.retained; }), "RetainedOnly",
      patient_level));
  return reports;
}

std::vector<PatientScore> aggregate_patient(const std::vector<EvalFrame>& frames) {
  std::map<int, std::pair<double, int>> sums;  // patient -> (sum, count) of retained
  for (const EvalFrame& f : frames) {
    auto& slot = sums.emplace(f.patient_id, std::make_pair(0.0, 0)).first->second;
    if (f.retained) {
      slot.first += f.hlhs_prob;
      slot.second += 1;
    }
  }
  std::vector<PatientScore> out;
  out.reserve(sums.size());
  for (const auto& [pid, sum_count] : sums) {
    PatientScore p;
    p.patient_id = pid;
    if (sum_count.second > 0) p.score = sum_count.first / sum_count.second;
    out.push_back(p);
  }
  return out;
}

std::string format_report_table(const std::vector<TableRow>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-26s %-12s %-17s %-17s %-17s %-8s\n",
                "Loss", "Test Quality", "Precision NC:CHD", "Recall NC:CHD",
                "F1 NC:CHD", "ROC-AUC");
  out += line;
  out += std::string(100, '-') + "\n";
  for (const TableRow& row : rows) {
    char pr[32], rc[32], f1[32], auc[16];
    std::snprintf(pr, sizeof(pr), "%.4f : %.4f", row.report.nc.precision,
                  row.report.chd.precision);
    std::snprintf(rc, sizeof(rc), "%.4f : %.4f", row.report.nc.recall,
                  row.report.chd.recall);
    std::snprintf(f1, sizeof(f1), "%.4f : %.4f", row.report.nc.f1,
                  row.report.chd.f1);
    if (row.report.auc_defined)
      std::snprintf(auc, sizeof(auc), "%.4f", row.report.roc_auc);
    else
      std::snprintf(auc, sizeof(auc), "n/a");
    std::snprintf(line, sizeof(line), "%-26s %-12s %-17s %-17s %-17s %-8s\n",
                  row.loss.c_str(), row.test_quality.c_str(), pr, rc, f1, auc);
    out += line;
  }
  return out;
}

}  // namespace fetalchd::metrics
