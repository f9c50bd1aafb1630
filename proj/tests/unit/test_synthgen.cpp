#include <cmath>
#include <set>

#include "doctest.h"
#include "retfuse/cohort.hpp"
#include "retfuse/errors.hpp"
#include "retfuse/eval/metrics.hpp"
#include "retfuse/labeling.hpp"
#include "retfuse/synthgen.hpp"

using namespace retfuse;
using namespace retfuse::synth;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.n_patients = 40;
  cfg.stroke_prevalence = 0.2;
  cfg.scans_min = 1;
  cfg.scans_max = 2;
  cfg.image_height = 16;
  cfg.image_width = 16;
  cfg.signal_oct = 0.3;
  cfg.signal_ir = 0.3;
  cfg.signal_ehr = 0.5;
  cfg.seed = 11;
  cfg.full_volumes = true;
  return cfg;
}

// Central 99% interval of Binomial(n, p), computed from the exact pmf.
std::pair<std::size_t, std::size_t> binomial_99_interval(std::size_t n, double p) {
  std::vector<long double> pmf(n + 1);
  // Iterative pmf: pmf[0] = (1-p)^n; pmf[k+1] = pmf[k] * (n-k)/(k+1) * p/(1-p).
  pmf[0] = powl(1.0L - static_cast<long double>(p), static_cast<long double>(n));
  for (std::size_t k = 0; k + 1 <= n; ++k)
    pmf[k + 1] = pmf[k] * static_cast<long double>(n - k) / static_cast<long double>(k + 1) *
                 (static_cast<long double>(p) / (1.0L - static_cast<long double>(p)));
  long double cdf = 0.0L;
  std::size_t lo = 0, hi = n;
  bool lo_set = false;
  for (std::size_t k = 0; k <= n; ++k) {
    cdf += pmf[k];
    if (!lo_set && cdf > 0.005L) {
      lo = k;
      lo_set = true;
    }
    if (cdf >= 0.995L) {
      hi = k;
      break;
    }
  }
  return {lo, hi};
}

}  // namespace

TEST_CASE("zero patients produce four empty lists") {
  SynthConfig cfg = small_config();
  cfg.n_patients = 0;
  const auto pop = generate_population(cfg);
  CHECK(pop.patients.empty());
  CHECK(pop.encounters.empty());
  CHECK(pop.studies.empty());
  CHECK(pop.planted.empty());
}

TEST_CASE("invalid configs are rejected") {
  SynthConfig cfg = small_config();
  cfg.stroke_prevalence = 1.5;
  CHECK_THROWS_AS(generate_population(cfg), ConfigError);
  cfg = small_config();
  cfg.image_height = 4;
  CHECK_THROWS_AS(generate_population(cfg), ConfigError);
  cfg = small_config();
  cfg.signal_oct = -0.1;
  CHECK_THROWS_AS(generate_population(cfg), ConfigError);
}

TEST_CASE("identical configs produce bit-identical populations") {
  const auto a = generate_population(small_config());
  const auto b = generate_population(small_config());

  REQUIRE(a.patients.size() == b.patients.size());
  REQUIRE(a.encounters.size() == b.encounters.size());
  REQUIRE(a.studies.size() == b.studies.size());
  REQUIRE(a.planted.size() == b.planted.size());

  for (std::size_t i = 0; i < a.patients.size(); ++i) {
    CHECK(a.patients[i].patient_id == b.patients[i].patient_id);
    CHECK(a.patients[i].birth_date == b.patients[i].birth_date);
  }
  for (std::size_t i = 0; i < a.studies.size(); ++i) {
    CHECK(a.studies[i].study_id == b.studies[i].study_id);
    CHECK(a.studies[i].acquisition_time == b.studies[i].acquisition_time);
    CHECK(a.studies[i].n_slices == b.studies[i].n_slices);
    REQUIRE(a.studies[i].oct_volume.size() == b.studies[i].oct_volume.size());
    for (std::size_t k = 0; k < a.studies[i].oct_volume.size(); ++k)
      CHECK(a.studies[i].oct_volume[k].pixels == b.studies[i].oct_volume[k].pixels);
    CHECK(a.studies[i].infrared.has_value() == b.studies[i].infrared.has_value());
    if (a.studies[i].infrared)
      CHECK(a.studies[i].infrared->pixels == b.studies[i].infrared->pixels);
  }
}

TEST_CASE("generated volumes respect the slice-count invariant") {
  const auto pop = generate_population(small_config());
  for (const auto& s : pop.studies) {
    CHECK(s.n_slices >= 25);
    CHECK(s.n_slices <= 49);
    CHECK(s.full_volume);
    CHECK(s.oct_volume.size() == s.n_slices);
    for (const auto& slice : s.oct_volume) {
      CHECK(slice.height == 16);
      CHECK(slice.width == 16);
      for (double p : slice.pixels) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
    }
  }

  SynthConfig mid = small_config();
  mid.full_volumes = false;
  const auto pop_mid = generate_population(mid);
  for (const auto& s : pop_mid.studies) {
    CHECK(s.oct_volume.size() == 1);
    CHECK(!s.full_volume);
  }
  // The materialized mid slice matches the full volume's mid slice.
  REQUIRE(pop_mid.studies.size() == pop.studies.size());
  for (std::size_t i = 0; i < pop.studies.size(); ++i)
    CHECK(pop_mid.studies[i].mid_slice().pixels == pop.studies[i].mid_slice().pixels);
}

TEST_CASE("render_image: zero signal is bit-identical across classes") {
  for (auto modality : {Modality::oct, Modality::infrared}) {
    Rng r0(99), r1(99);
    const auto img0 = render_image(0, modality, 0.0, 16, 16, r0);
    const auto img1 = render_image(1, modality, 0.0, 16, 16, r1);
    CHECK(img0.pixels == img1.pixels);
  }
  CHECK_THROWS_AS([] {
    Rng r(1);
    render_image(0, Modality::oct, 0.1, 4, 16, r);
  }(), ConfigError);
}

TEST_CASE("render_image: strong signal separates classes on mean intensity") {
  std::vector<double> scores;
  std::vector<int> labels;
  Rng rng(123);
  for (int i = 0; i < 500; ++i) {
    const int y = i % 2;
    Rng stream(rng.next_u64());
    const auto img = render_image(y, Modality::oct, 0.5, 64, 64, stream);
    double mean = 0.0;
    for (double p : img.pixels) mean += p;
    scores.push_back(mean / static_cast<double>(img.pixels.size()));
    labels.push_back(y);
  }
  // Linear probe on mean pixel intensity.
  CHECK(eval::auroc(scores, labels) > 0.9);
}

TEST_CASE("confirmed-stroke fraction lands in the exact binomial 99% interval") {
  SynthConfig cfg;
  cfg.n_patients = 2000;
  cfg.stroke_prevalence = 0.024;
  cfg.scans_min = 1;
  cfg.scans_max = 2;
  cfg.image_height = 8;
  cfg.image_width = 8;
  cfg.seed = 20240808;
  cfg.full_volumes = false;
  const auto pop = generate_population(cfg);

  const auto [events, traces] = cohort::filter_stroke_encounters(pop.patients, pop.encounters);
  std::set<std::string> stroke_patients;
  for (const auto& e : events) stroke_patients.insert(e.patient_id);

  const auto [lo, hi] = binomial_99_interval(cfg.n_patients, cfg.stroke_prevalence);
  CHECK(stroke_patients.size() >= lo);
  CHECK(stroke_patients.size() <= hi);

  // ~2.4% of studies positive, mirroring the cohort shape target.
  const auto eligible = cohort::filter_scan_studies(pop.patients, pop.studies);
  const auto samples = labeling::assign_labels(pop.patients, eligible, events);
  std::size_t n_pos = 0;
  for (const auto& s : samples) n_pos += s.y == 1;
  CHECK(n_pos > 0);
}

TEST_CASE("cohort recovers exactly the planted stroke events") {
  const auto pop = generate_population(small_config());
  const auto [events, traces] = cohort::filter_stroke_encounters(pop.patients, pop.encounters);

  std::set<std::string> got, expected;
  for (const auto& e : events) got.insert(e.encounter_id);
  for (const auto& e : pop.planted) expected.insert(e.encounter_id);
  CHECK(got == expected);
}

TEST_CASE("generate -> cohort -> label recovers the planted positives exactly") {
  SynthConfig cfg = small_config();
  cfg.n_patients = 300;
  cfg.full_volumes = false;
  const auto pop = generate_population(cfg);

  const auto [events, traces] = cohort::filter_stroke_encounters(pop.patients, pop.encounters);
  const auto eligible = cohort::filter_scan_studies(pop.patients, pop.studies);
  const auto samples = labeling::assign_labels(pop.patients, eligible, events);

  std::set<std::string> labeled_positive;
  for (const auto& s : samples)
    if (s.y == 1) labeled_positive.insert(s.sample_id);

  // Oracle: eligible studies within 365 days of any planted event.
  std::set<std::string> expected;
  for (const auto& study : eligible) {
    for (const auto& ev : pop.planted) {
      if (ev.patient_id != study.patient_id) continue;
      if (std::fabs(ev.stroke_time - study.acquisition_time) <= 365.0) {
        expected.insert(study.study_id + ":oct");
        expected.insert(study.study_id + ":infrared");
      }
    }
  }
  CHECK(labeled_positive == expected);
  CHECK(!labeled_positive.empty());
}
