#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace retfuse {

// Timestamps are fractional days since the dataset epoch. Birth dates may be
// negative (born before the epoch).
using Day = double;

constexpr double kDaysPerYear = 365.25;

inline double age_years(Day birth_date, Day at) { return (at - birth_date) / kDaysPerYear; }

enum class Sex { male, female };
enum class Smoking { never, former, current };
enum class EncounterType { inpatient, outpatient, other };
enum class DrugOrder { antiplatelet, rtpa, other };
enum class Procedure { ct, ct_angiography, other };
enum class Eye { left, right };
enum class Anatomy { macula, peripapillary, anterior };
enum class ScanMode { art, other };
enum class Modality { oct, infrared };
enum class StrokeSubtype { tia, is, ich };

const char* to_string(Sex v);
const char* to_string(Smoking v);
const char* to_string(EncounterType v);
const char* to_string(DrugOrder v);
const char* to_string(Procedure v);
const char* to_string(Eye v);
const char* to_string(Anatomy v);
const char* to_string(ScanMode v);
const char* to_string(Modality v);
const char* to_string(StrokeSubtype v);

Sex sex_from_string(const std::string& s);
Smoking smoking_from_string(const std::string& s);
EncounterType encounter_type_from_string(const std::string& s);
DrugOrder drug_order_from_string(const std::string& s);
Procedure procedure_from_string(const std::string& s);
Eye eye_from_string(const std::string& s);
Anatomy anatomy_from_string(const std::string& s);
ScanMode scan_mode_from_string(const std::string& s);
Modality modality_from_string(const std::string& s);
StrokeSubtype subtype_from_string(const std::string& s);

struct VitalSigns {
  std::optional<double> bmi;
  std::optional<double> systolic_bp;
  std::optional<double> diastolic_bp;
  std::optional<double> temperature;
  std::optional<double> pulse_rate;
  std::optional<double> respiratory_rate;

  bool any() const {
    return bmi || systolic_bp || diastolic_bp || temperature || pulse_rate || respiratory_rate;
  }
};

struct PatientRecord {
  std::string patient_id;
  std::optional<Day> birth_date;
  Sex sex = Sex::female;
  Smoking smoking = Smoking::never;
};

struct Encounter {
  std::string encounter_id;
  std::string patient_id;
  EncounterType type = EncounterType::other;
  std::optional<Day> admission_time;
  std::optional<Day> discharge_time;
  std::vector<std::string> diagnosis_codes;  // ICD-10-CM strings
  std::vector<DrugOrder> drug_orders;
  std::vector<Procedure> procedures;
  std::optional<VitalSigns> vitals;
};

struct ImageGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  Modality modality = Modality::oct;
  std::vector<double> pixels;  // row-major, values in [0, 1]

  ImageGrid() = default;
  ImageGrid(std::size_t h, std::size_t w, Modality m)
      : height(h), width(w), modality(m), pixels(h * w, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
};

struct ScanStudy {
  std::string study_id;
  std::string patient_id;
  Day acquisition_time = 0;
  Eye eye = Eye::left;
  Anatomy anatomy = Anatomy::macula;
  ScanMode scan_mode = ScanMode::art;
  // Nominal volume depth is n_slices; oct_volume holds either the full volume
  // or just the mid slice, depending on how the population was materialized.
  std::size_t n_slices = 0;
  bool full_volume = true;
  std::vector<ImageGrid> oct_volume;
  std::optional<ImageGrid> infrared;

  const ImageGrid& mid_slice() const {
    return full_volume ? oct_volume[oct_volume.size() / 2] : oct_volume.front();
  }
};

struct StrokeEvent {
  std::string patient_id;
  std::string encounter_id;
  Day stroke_time = 0;  // admission time of the confirming encounter
  StrokeSubtype subtype = StrokeSubtype::is;
};

std::string make_id(const char* prefix, std::size_t n);

}  // namespace retfuse
