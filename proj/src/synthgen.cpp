#include "retfuse/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "retfuse/errors.hpp"

namespace retfuse::synth {

void validate(const SynthConfig& config) {
  if (config.stroke_prevalence < 0.0 || config.stroke_prevalence > 1.0)
    throw ConfigError("synth: stroke_prevalence must lie in [0, 1]");
  if (config.image_height < 8 || config.image_width < 8)
    throw ConfigError("synth: image dimensions must be at least 8");
  if (config.signal_oct < 0.0 || config.signal_ir < 0.0 || config.signal_ehr < 0.0)
    throw ConfigError("synth: signal strengths must be non-negative");
  if (config.scans_min < 1 || config.scans_max < config.scans_min)
    throw ConfigError("synth: invalid scans-per-patient range");
  if (config.time_span_days < 800.0)
    throw ConfigError("synth: time span must cover at least 800 days");
}

ImageGrid render_image(int class_label, Modality modality, double signal_strength,
                       std::size_t h, std::size_t w, Rng& rng) {
  if (h < 8 || w < 8) throw ConfigError("render_image: dimensions must be at least 8");

  ImageGrid img(h, w, modality);
  const double brightness = 0.38 + rng.uniform(-0.03, 0.03);
  const double phase = rng.uniform(0.0, 1.0);

  struct Blob {
    double cy, cx, amp, inv_two_sigma_sq;
  };
  std::vector<Blob> blobs;

  // Class-independent distractor blobs; the class signal has to be told
  // apart from ordinary anatomic variation rather than from a blank field.
  const std::size_t n_distractors = rng.below(3);
  for (std::size_t i = 0; i < n_distractors; ++i) {
    Blob b;
    b.cy = rng.uniform(0.15, 0.85) * static_cast<double>(h);
    b.cx = rng.uniform(0.15, 0.85) * static_cast<double>(w);
    const double sigma = rng.uniform(0.08, 0.14) * static_cast<double>(std::min(h, w));
    b.amp = rng.uniform(0.10, 0.22);
    b.inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    blobs.push_back(b);
  }

  // Signal blob parameters are consumed for both classes so equal rng
  // streams give bit-identical images at signal_strength 0.
  {
    Blob b;
    b.cy = rng.uniform(0.30, 0.70) * static_cast<double>(h);
    b.cx = rng.uniform(0.30, 0.70) * static_cast<double>(w);
    const double sigma = rng.uniform(0.10, 0.16) * static_cast<double>(std::min(h, w));
    b.amp = signal_strength * rng.uniform(0.8, 1.2);
    b.inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    if (class_label == 1) blobs.push_back(b);
  }

  const double band_period = static_cast<double>(h) / 4.0;
  const double half_h = 0.5 * static_cast<double>(h - 1);
  const double half_w = 0.5 * static_cast<double>(w - 1);
  const double max_r_sq = half_h * half_h + half_w * half_w;

  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double v = brightness + rng.uniform(-0.08, 0.08);
      if (modality == Modality::oct) {
        v += 0.06 * std::sin(6.283185307179586 * (static_cast<double>(r) / band_period + phase));
      } else {
        const double dr = static_cast<double>(r) - half_h;
        const double dc = static_cast<double>(c) - half_w;
        v -= 0.05 * (dr * dr + dc * dc) / max_r_sq;
      }
      for (const Blob& b : blobs) {
        const double dy = static_cast<double>(r) - b.cy;
        const double dx = static_cast<double>(c) - b.cx;
        v += b.amp * std::exp(-(dy * dy + dx * dx) * b.inv_two_sigma_sq);
      }
      img.at(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return img;
}

namespace {

constexpr const char* kBenignCodes[] = {"E11.9", "I10",   "J45.2", "H25.1", "M54.5",
                                        "K21.0", "Z00.0", "N18.3", "F41.1", "D64.9",
                                        "G43.9", "I64",   "G45.8", "H40.1", "I25.1"};

std::string random_benign_code(Rng& rng) {
  return kBenignCodes[rng.below(std::size(kBenignCodes))];
}

std::string subtype_code(StrokeSubtype subtype, Rng& rng) {
  switch (subtype) {
    case StrokeSubtype::tia:
      return "G459";
    case StrokeSubtype::is:
      return rng.bernoulli(0.5) ? "I63.5" : "I63.9";
    default:
      switch (rng.below(3)) {
        case 0: return "I60.7";
        case 1: return "I61.0";
        default: return "I62.9";
      }
  }
}

VitalSigns draw_vitals(Rng& rng, double ehr_shift, double present_p = 0.9) {
  VitalSigns v;
  auto maybe = [&](double mean, double sd, double lo, double hi) -> std::optional<double> {
    if (!rng.bernoulli(present_p)) return std::nullopt;
    return std::clamp(rng.normal(mean, sd), lo, hi);
  };
  v.bmi = maybe(26.0 + 2.5 * ehr_shift, 4.0, 14.0, 50.0);
  v.systolic_bp = maybe(124.0 + 25.0 * ehr_shift, 14.0, 80.0, 230.0);
  v.diastolic_bp = maybe(78.0 + 12.0 * ehr_shift, 9.0, 40.0, 140.0);
  v.temperature = maybe(36.8, 0.4, 34.0, 41.0);
  v.pulse_rate = maybe(76.0 + 8.0 * ehr_shift, 10.0, 35.0, 180.0);
  v.respiratory_rate = maybe(15.5, 2.5, 6.0, 40.0);
  return v;
}

enum class Violation { outpatient, missing_discharge, no_ct, no_confirmation };

struct PatientBundle {
  PatientRecord patient;
  std::vector<Encounter> encounters;
  std::vector<ScanStudy> studies;
  std::vector<StrokeEvent> planted;
};

// One cerebrovascular index encounter. For confirmed == true every cohort
// rule passes; otherwise exactly one rule is broken, chosen so the breakage
// is invisible to the derived clinical features (codes and vitals keep the
// same distribution either way).
Encounter make_index_encounter(const std::string& patient_id, const std::string& encounter_id,
                               Day t_event, StrokeSubtype subtype, bool confirmed, Rng& rng) {
  Encounter enc;
  enc.encounter_id = encounter_id;
  enc.patient_id = patient_id;
  enc.type = EncounterType::inpatient;
  enc.admission_time = t_event;
  enc.diagnosis_codes.push_back(subtype_code(subtype, rng));
  const int extra = static_cast<int>(rng.below(3));
  for (int i = 0; i < extra; ++i) enc.diagnosis_codes.push_back(random_benign_code(rng));
  enc.procedures.push_back(rng.bernoulli(0.35) ? Procedure::ct_angiography : Procedure::ct);
  if (rng.bernoulli(0.3)) enc.procedures.push_back(Procedure::other);
  enc.vitals = draw_vitals(rng, 0.0);

  double los_days = 0.0;
  switch (subtype) {
    case StrokeSubtype::tia:
      los_days = rng.uniform(1.0, 6.0);
      enc.drug_orders.push_back(DrugOrder::antiplatelet);
      break;
    case StrokeSubtype::is:
      los_days = rng.uniform(2.0, 10.0);
      enc.drug_orders.push_back(rng.bernoulli(0.5) ? DrugOrder::rtpa : DrugOrder::antiplatelet);
      break;
    case StrokeSubtype::ich:
      los_days = rng.uniform(12.5, 21.0);
      if (rng.bernoulli(0.4)) enc.drug_orders.push_back(DrugOrder::other);
      break;
  }

  if (!confirmed) {
    const auto violation = static_cast<Violation>(rng.below(4));
    switch (violation) {
      case Violation::outpatient:
        enc.type = EncounterType::outpatient;
        break;
      case Violation::missing_discharge:
        los_days = -1.0;  // leave discharge unset below
        break;
      case Violation::no_ct:
        enc.procedures.clear();
        if (rng.bernoulli(0.5)) enc.procedures.push_back(Procedure::other);
        break;
      case Violation::no_confirmation:
        if (subtype == StrokeSubtype::ich) {
          los_days = rng.uniform(1.0, 11.5);
        } else {
          enc.drug_orders.clear();
          if (rng.bernoulli(0.5)) enc.drug_orders.push_back(DrugOrder::other);
        }
        break;
    }
  }
  if (los_days >= 0.0) enc.discharge_time = t_event + los_days;
  return enc;
}

Encounter make_background_encounter(const std::string& patient_id,
                                    const std::string& encounter_id, Day t, Rng& rng) {
  Encounter enc;
  enc.encounter_id = encounter_id;
  enc.patient_id = patient_id;
  enc.type = rng.bernoulli(0.8) ? EncounterType::outpatient : EncounterType::other;
  enc.admission_time = t;
  if (rng.bernoulli(0.5)) enc.discharge_time = t + rng.uniform(0.05, 1.0);
  const int n_codes = 1 + static_cast<int>(rng.below(3));
  for (int i = 0; i < n_codes; ++i) enc.diagnosis_codes.push_back(random_benign_code(rng));
  if (rng.bernoulli(0.15)) enc.procedures.push_back(Procedure::other);
  if (rng.bernoulli(0.1)) enc.drug_orders.push_back(DrugOrder::other);
  if (rng.bernoulli(0.8)) enc.vitals = draw_vitals(rng, 0.0);
  return enc;
}

PatientBundle generate_patient(const SynthConfig& config, std::size_t index) {
  Rng rng(stream_seed(config.seed, "patient", index));
  PatientBundle bundle;

  // The stroke flag is the first draw so its distribution is exactly
  // Bernoulli(prevalence) regardless of everything else.
  const bool stroke_flag = rng.bernoulli(config.stroke_prevalence);

  PatientRecord& patient = bundle.patient;
  patient.patient_id = make_id("P", index);
  const bool minor = !stroke_flag && rng.bernoulli(0.05);
  const double age_at_epoch =
      minor ? rng.uniform(6.0, 15.0) : std::clamp(rng.normal(55.0, 14.0), 20.0, 90.0);
  patient.birth_date = -age_at_epoch * kDaysPerYear;
  if (!stroke_flag && rng.bernoulli(0.01)) patient.birth_date = std::nullopt;
  patient.sex = rng.bernoulli(0.37) ? Sex::male : Sex::female;
  const double smoke_draw = rng.uniform();
  patient.smoking = smoke_draw < 0.55   ? Smoking::never
                    : smoke_draw < 0.80 ? Smoking::former
                                        : Smoking::current;

  std::size_t next_encounter = 0;
  auto encounter_id = [&] { return make_id("E", index * 100 + next_encounter++); };

  // Index event (confirmed stroke or feature-identical decoy).
  const Day t_event = rng.uniform(365.0, config.time_span_days - 365.0);
  const auto subtype = static_cast<StrokeSubtype>(rng.uniform() < 0.2   ? 0
                                                  : rng.uniform() < 0.75 ? 1
                                                                         : 2);
  std::vector<Day> event_times{t_event};
  {
    const std::string eid = encounter_id();
    bundle.encounters.push_back(
        make_index_encounter(patient.patient_id, eid, t_event, subtype, stroke_flag, rng));
    if (stroke_flag)
      bundle.planted.push_back(StrokeEvent{patient.patient_id, eid, t_event, subtype});
  }

  // Occasional second event, exercising multiple StrokeEvents per patient.
  if (rng.bernoulli(0.12) && t_event + 500.0 < config.time_span_days - 100.0) {
    const Day t2 = rng.uniform(t_event + 400.0, config.time_span_days - 100.0);
    const auto subtype2 = static_cast<StrokeSubtype>(rng.below(3));
    const std::string eid = encounter_id();
    bundle.encounters.push_back(
        make_index_encounter(patient.patient_id, eid, t2, subtype2, stroke_flag, rng));
    if (stroke_flag) {
      bundle.planted.push_back(StrokeEvent{patient.patient_id, eid, t2, subtype2});
      event_times.push_back(t2);
    }
  }

  const int n_background = static_cast<int>(rng.below(4));
  for (int i = 0; i < n_background; ++i) {
    const Day t = rng.uniform(0.0, config.time_span_days);
    bundle.encounters.push_back(
        make_background_encounter(patient.patient_id, encounter_id(), t, rng));
  }

  // Scans, with the same placement law around the index event for every
  // patient; only the realized label decides the planted signal.
  const int n_scans =
      static_cast<int>(rng.uniform_int(config.scans_min, config.scans_max));
  for (int s = 0; s < n_scans; ++s) {
    ScanStudy study;
    const std::size_t study_index = index * 100 + static_cast<std::size_t>(s);
    study.study_id = make_id("S", study_index);
    study.patient_id = patient.patient_id;
    study.eye = rng.bernoulli(0.5) ? Eye::left : Eye::right;
    Day t_scan = rng.bernoulli(0.75) ? t_event + rng.uniform(-300.0, 300.0)
                                     : rng.uniform(0.0, config.time_span_days);
    t_scan = std::clamp(t_scan, 0.0, config.time_span_days);
    study.acquisition_time = t_scan;

    const double anatomy_draw = rng.uniform();
    study.anatomy = anatomy_draw < 0.85   ? Anatomy::macula
                    : anatomy_draw < 0.95 ? Anatomy::peripapillary
                                          : Anatomy::anterior;
    study.scan_mode = rng.bernoulli(0.9) ? ScanMode::art : ScanMode::other;
    study.n_slices = static_cast<std::size_t>(rng.uniform_int(25, 49));
    study.full_volume = config.full_volumes;
    const bool has_infrared = rng.bernoulli(0.92);

    bool in_window = false;
    if (stroke_flag)
      for (Day te : event_times) in_window = in_window || std::fabs(te - t_scan) <= 365.0;
    const int label = in_window ? 1 : 0;

    const std::uint64_t study_seed = stream_seed(config.seed, "study", study_index);
    if (config.full_volumes) {
      study.oct_volume.reserve(study.n_slices);
      for (std::size_t k = 0; k < study.n_slices; ++k) {
        Rng slice_rng(stream_seed(study_seed, "slice", k));
        study.oct_volume.push_back(render_image(label, Modality::oct, config.signal_oct,
                                                config.image_height, config.image_width,
                                                slice_rng));
      }
    } else {
      Rng slice_rng(stream_seed(study_seed, "slice", study.n_slices / 2));
      study.oct_volume.push_back(render_image(label, Modality::oct, config.signal_oct,
                                              config.image_height, config.image_width,
                                              slice_rng));
    }
    if (has_infrared) {
      Rng ir_rng(stream_seed(study_seed, "infrared", 0));
      study.infrared = render_image(label, Modality::infrared, config.signal_ir,
                                    config.image_height, config.image_width, ir_rng);
    }

    // The OCT visit itself is an outpatient encounter carrying vitals; the
    // planted EHR effect rides on them for in-window scans.
    Encounter visit;
    visit.encounter_id = encounter_id();
    visit.patient_id = patient.patient_id;
    visit.type = EncounterType::outpatient;
    visit.admission_time = t_scan;
    if (rng.bernoulli(0.95))
      visit.vitals = draw_vitals(rng, in_window ? config.signal_ehr : 0.0, 0.95);
    if (rng.bernoulli(0.25)) visit.diagnosis_codes.push_back(random_benign_code(rng));
    bundle.encounters.push_back(std::move(visit));

    bundle.studies.push_back(std::move(study));
  }
  return bundle;
}

}  // namespace

Population generate_population(const SynthConfig& config) {
  validate(config);
  Population pop;
  if (config.n_patients == 0) return pop;

  std::vector<PatientBundle> bundles(config.n_patients);
  const auto n = static_cast<long long>(config.n_patients);
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < n; ++i)
    bundles[static_cast<std::size_t>(i)] =
        generate_patient(config, static_cast<std::size_t>(i));

  for (auto& bundle : bundles) {
    pop.patients.push_back(std::move(bundle.patient));
    for (auto& e : bundle.encounters) pop.encounters.push_back(std::move(e));
    for (auto& s : bundle.studies) pop.studies.push_back(std::move(s));
    for (auto& ev : bundle.planted) pop.planted.push_back(std::move(ev));
  }
  return pop;
}

}  // namespace retfuse::synth
