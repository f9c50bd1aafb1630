#pragma once

#include <cstdint>
#include <vector>

#include "retfuse/records.hpp"
#include "retfuse/rng.hpp"

namespace retfuse::synth {

struct SynthConfig {
  std::size_t n_patients = 0;
  double stroke_prevalence = 0.024;
  int scans_min = 1;
  int scans_max = 3;
  std::size_t image_height = 64;
  std::size_t image_width = 64;
  double signal_oct = 0.0;
  double signal_ir = 0.0;
  double signal_ehr = 0.0;
  double time_span_days = 2920;
  std::uint64_t seed = 0;
  // When false only the mid slice of each OCT volume is rendered; the nominal
  // slice count is kept so volume metadata stays realistic.
  bool full_volumes = true;
};

void validate(const SynthConfig& config);

struct Population {
  std::vector<PatientRecord> patients;
  std::vector<Encounter> encounters;
  std::vector<ScanStudy> studies;
  std::vector<StrokeEvent> planted;  // ground truth for oracle tests
};

// Every patient receives an index event with stroke diagnosis codes; for the
// stroke_prevalence fraction the encounter satisfies the full confirmation
// rules, for the rest exactly one rule is broken in a way that is invisible
// to the clinical feature set. Planted image/EHR signal follows the eventual
// window label of each scan, scaled by the per-modality signal strengths.
Population generate_population(const SynthConfig& config);

// Background noise plus, for class 1, an additive localized Gaussian blob
// whose amplitude is proportional to signal_strength. The blob parameters
// are drawn for both classes so equal rng streams give bit-identical output
// at signal_strength 0.
ImageGrid render_image(int class_label, Modality modality, double signal_strength,
                       std::size_t h, std::size_t w, Rng& rng);

}  // namespace retfuse::synth
