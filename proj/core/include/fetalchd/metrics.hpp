#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fetalchd/manifest.hpp"

namespace fetalchd::metrics {

struct Prf {
  double precision = 0, recall = 0, f1 = 0;
  // false when the corresponding denominator was zero (value reported as 0)
  bool precision_defined = true, recall_defined = true, f1_defined = true;
};

/// Standard precision/recall/F1 of `positive_class` given predicted and true
/// class ids. Zero denominators yield 0 with the matching flag cleared.
Prf precision_recall_f1(const std::vector<int>& predicted,
                        const std::vector<int>& labels, int positive_class);

/// Exact ROC-AUC as the Mann-Whitney statistic
/// P(score_pos > score_neg) + 0.5 P(tie), computed via midranks. Labels are
/// 0/1; throws std::invalid_argument unless both classes are present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// One frame as the evaluation harness sees it.
struct EvalFrame {
  int frame_id = 0;
  int patient_id = 0;
  Quality quality = Quality::Medium;
  int label = 0;        // 0 NC, 1 HLHS
  double hlhs_prob = 0; // model score for the HLHS class
  int predicted = 0;    // CHD argmax
  bool retained = true; // reliability verdict; true when unfiltered
};

struct EvalReport {
  std::string stratum;
  int n_frames = 0;
  int n_retained = 0;
  Prf nc, chd;  // per-class metrics, class order (NC, HLHS)
  double roc_auc = 0;
  bool auc_defined = false;
  std::optional<double> patient_auc;
};

/// Metrics over one frame subset. When patient_level is true, also reports
/// the AUC of mean retained HLHS probabilities per patient.
EvalReport evaluate_frames(const std::vector<EvalFrame>& frames,
                           const std::string& stratum_name, bool patient_level);

/// The four standard strata: Low+Med+High, Med+High, High, RetainedOnly.
std::vector<EvalReport> stratified_report(const std::vector<EvalFrame>& frames,
                                          bool patient_level = true);

struct PatientScore {
  int patient_id = 0;
  std::optional<double> score;  // nullopt = Abstain (no retained frames)
};

/// Mean retained HLHS probability per patient; fully filtered patients
/// abstain.
std::vector<PatientScore> aggregate_patient(const std::vector<EvalFrame>& frames);

struct TableRow {
  std::string loss;
  std::string test_quality;
  EvalReport report;
};

/// Fixed-layout text table: Loss, Test Quality, Precision/Recall/F1 as
/// NC:CHD pairs, ROC-AUC.
std::string format_report_table(const std::vector<TableRow>& rows);

}  // namespace fetalchd::metrics
