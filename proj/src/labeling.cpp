#include "retfuse/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "retfuse/errors.hpp"
#include "retfuse/rng.hpp"

namespace retfuse::labeling {

const char* to_string(Task t) {
  switch (t) {
    case Task::overall: return "overall";
    case Task::risk: return "risk";
    default: return "lasting";
  }
}

Task task_from_string(const std::string& s) {
  if (s == "overall") return Task::overall;
  if (s == "risk") return Task::risk;
  if (s == "lasting") return Task::lasting;
  throw ConfigError("unknown task: " + s);
}

void validate(const TaskSpec& spec) {
  if (spec.horizon_days != 90 && spec.horizon_days != 180 && spec.horizon_days != 270 &&
      spec.horizon_days != 365)
    throw ConfigError("horizon must be one of 90, 180, 270, 365");
}

bool task_keeps(const TaskSpec& spec, int y, const std::optional<double>& delta_days) {
  if (y == 0) return true;
  if (!delta_days) return false;
  const double d = *delta_days;
  const double n = spec.horizon_days;
  switch (spec.task) {
    case Task::overall:
      return std::fabs(d) <= n;
    case Task::risk:
      return d > 0.0 && d <= n;
    default:
      return d < 0.0 && d >= -n;
  }
}

std::vector<LabeledSample> assign_labels(const std::vector<PatientRecord>& patients,
                                         const std::vector<ScanStudy>& studies,
                                         const std::vector<StrokeEvent>& events,
                                         double window_days) {
  std::map<std::string, std::vector<const StrokeEvent*>> events_by_patient;
  for (const auto& e : events) events_by_patient[e.patient_id].push_back(&e);

  std::map<std::string, const PatientRecord*> roster;
  for (const auto& p : patients) roster[p.patient_id] = &p;

  std::vector<LabeledSample> samples;
  samples.reserve(studies.size() * 2);

  for (std::size_t idx = 0; idx < studies.size(); ++idx) {
    const ScanStudy& study = studies[idx];
    if (!roster.count(study.patient_id))
      throw DataError("assign_labels: study " + study.study_id + " references unknown patient " +
                      study.patient_id);

    std::optional<double> delta;
    std::optional<StrokeSubtype> subtype;
    const auto it = events_by_patient.find(study.patient_id);
    if (it != events_by_patient.end()) {
      const StrokeEvent* nearest = nullptr;
      for (const StrokeEvent* e : it->second) {
        const double d = e->stroke_time - study.acquisition_time;
        if (!nearest) {
          nearest = e;
          delta = d;
          continue;
        }
        const double best = *delta;
        // Minimum |gap|; ties prefer the future event, then the id order.
        if (std::fabs(d) < std::fabs(best) ||
            (std::fabs(d) == std::fabs(best) && d > best)) {
          nearest = e;
          delta = d;
        }
      }
      subtype = nearest->subtype;
    }

    const int y = delta && std::fabs(*delta) <= window_days ? 1 : 0;

    LabeledSample base;
    base.patient_id = study.patient_id;
    base.study_id = study.study_id;
    base.study_index = idx;
    base.eye = study.eye;
    base.t_scan = study.acquisition_time;
    base.y = y;
    base.delta_days = delta;
    base.subtype = subtype;

    LabeledSample oct = base;
    oct.modality = Modality::oct;
    oct.sample_id = study.study_id + ":oct";
    samples.push_back(std::move(oct));

    if (study.infrared) {
      LabeledSample ir = base;
      ir.modality = Modality::infrared;
      ir.sample_id = study.study_id + ":infrared";
      samples.push_back(std::move(ir));
    }
  }
  return samples;
}

std::vector<LabeledSample> task_filter(const std::vector<LabeledSample>& samples,
                                       const TaskSpec& spec) {
  validate(spec);
  std::vector<LabeledSample> kept;
  kept.reserve(samples.size());
  for (const auto& s : samples)
    if (task_keeps(spec, s.y, s.delta_days)) kept.push_back(s);
  return kept;
}

namespace {

struct PatientPools {
  std::vector<std::string> positive;  // patients with any positive sample
  std::vector<std::string> negative;
};

PatientPools pool_patients(const std::vector<LabeledSample>& samples) {
  std::map<std::string, bool> has_positive;
  for (const auto& s : samples) has_positive[s.patient_id] |= (s.y == 1);
  PatientPools pools;
  for (const auto& [id, pos] : has_positive)
    (pos ? pools.positive : pools.negative).push_back(id);
  return pools;  // map iteration gives sorted, deterministic order
}

void shuffle_ids(std::vector<std::string>& ids, Rng& rng) {
  for (std::size_t i = ids.size(); i > 1; --i)
    std::swap(ids[i - 1], ids[rng.below(i)]);
}

}  // namespace

SplitResult patient_split(const std::vector<LabeledSample>& samples, double test_fraction,
                          std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw ConfigError("patient_split: test_fraction must lie in (0, 1)");

  PatientPools pools = pool_patients(samples);
  Rng rng(stream_seed(seed, "patient-split"));

  SplitResult result;
  const std::size_t n_total = pools.positive.size() + pools.negative.size();
  const auto total_test =
      static_cast<std::size_t>(std::llround(static_cast<double>(n_total) * test_fraction));

  if (pools.positive.size() < 2 || pools.negative.size() < 2) {
    // Too small to stratify; plain patient-level split.
    result.stratified = false;
    std::vector<std::string> all = pools.positive;
    all.insert(all.end(), pools.negative.begin(), pools.negative.end());
    std::sort(all.begin(), all.end());
    shuffle_ids(all, rng);
    for (std::size_t i = 0; i < all.size(); ++i)
      (i < total_test ? result.test_patients : result.train_patients).insert(all[i]);
  } else {
    shuffle_ids(pools.positive, rng);
    shuffle_ids(pools.negative, rng);
    auto pos_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(pools.positive.size()) * test_fraction));
    pos_test = std::min(pos_test, pools.positive.size());
    const std::size_t neg_test =
        std::min(total_test > pos_test ? total_test - pos_test : 0, pools.negative.size());
    for (std::size_t i = 0; i < pools.positive.size(); ++i)
      (i < pos_test ? result.test_patients : result.train_patients).insert(pools.positive[i]);
    for (std::size_t i = 0; i < pools.negative.size(); ++i)
      (i < neg_test ? result.test_patients : result.train_patients).insert(pools.negative[i]);
  }

  for (const auto& s : samples)
    (result.test_patients.count(s.patient_id) ? result.test : result.train).push_back(s);
  return result;
}

std::vector<Fold> kfold_patient_folds(const std::vector<LabeledSample>& samples, int k,
                                      std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold: k must be at least 2");
  PatientPools pools = pool_patients(samples);
  if (pools.positive.size() + pools.negative.size() < static_cast<std::size_t>(k))
    throw ConfigError("kfold: fewer patients than folds");

  Rng rng(stream_seed(seed, "kfold"));
  shuffle_ids(pools.positive, rng);
  shuffle_ids(pools.negative, rng);

  // Round-robin over shuffled strata keeps positive patients spread evenly.
  std::map<std::string, int> fold_of;
  int cursor = 0;
  for (const auto& id : pools.positive) fold_of[id] = cursor++ % k;
  for (const auto& id : pools.negative) fold_of[id] = cursor++ % k;

  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (const auto& s : samples) {
    const int f = fold_of.at(s.patient_id);
    for (int i = 0; i < k; ++i) {
      if (i == f) {
        folds[static_cast<std::size_t>(i)].validation.push_back(s);
        folds[static_cast<std::size_t>(i)].validation_patients.insert(s.patient_id);
      } else {
        folds[static_cast<std::size_t>(i)].train.push_back(s);
      }
    }
  }
  return folds;
}

}  // namespace retfuse::labeling
