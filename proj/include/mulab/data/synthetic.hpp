#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "mulab/data/dataset.hpp"

namespace mulab::data {

// Generator settings for a medical-style synthetic corpus.
//
// Each class (or label) owns a random template image with blocky spatial
// structure and unit RMS. A sample is
//
//   pixel = 0.5 + contrast * (signal + patient_offset + noise)
//
// clipped to [0, 1] and quantized to k / 255. For single-label tasks the
// signal is separation[k] * template[k]; for multi-label tasks it is the sum
// of separation[l] * template[l] over positive labels. patient_offset is a
// per-patient image shared by all of that patient's samples, so patient-level
// splitting matters. The group attribute is drawn per patient, independently
// of labels.
struct SyntheticSpec {
    std::size_t num_patients = 1000;
    std::size_t samples_per_patient_min = 1;
    std::size_t samples_per_patient_max = 5;
    TaskKind task = TaskKind::single(3);
    std::vector<double> class_weights;     // single-label: class probabilities, sums to 1
    std::vector<double> label_prevalence;  // multi-label: P(label positive), each in (0, 1)
    std::vector<double> group_proportions{0.5, 0.5};
    std::vector<std::size_t> feature_shape{1, 16, 16};
    std::vector<double> class_separation;  // per class or label, > 0
    double noise_std = 1.0;
    double patient_effect_std = 0.3;
    double contrast = 0.12;
    std::size_t template_block = 2;  // side of the constant blocks in each template
    double label_noise_rate = 0.0;   // single-label: recorded label replaced by another class
    double unknown_rate = 0.0;       // multi-label: entries reported as Unknown
    std::uint64_t seed = 0;

    friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

// Throws ConfigError when the spec is degenerate or inconsistent.
void validate(const SyntheticSpec& spec);

LabeledDataset generate_synthetic(const SyntheticSpec& spec);

void to_json(nlohmann::json& j, const SyntheticSpec& spec);
void from_json(const nlohmann::json& j, SyntheticSpec& spec);

}  // namespace mulab::data
