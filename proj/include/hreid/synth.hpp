#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hreid/dataset.hpp"

namespace hreid {

struct SynthAttribute {
    std::string name;
    std::vector<std::string> values;
    // distance between adjacent value cluster centers, in feature units
    double separation = 1.0;
    // probability that an identity copies its value from the previous
    // attribute; first attribute must leave this unset
    std::optional<double> correlation_with_previous;
};

struct SynthConfig {
    std::uint64_t seed = 0;
    int n_identities = 0;
    int images_per_identity = 0;
    int feature_dim = 0;
    std::vector<SynthAttribute> attributes;
    double noise_sigma = 1.0;
    double train_fraction = 0.0;
    double gallery_fraction = 0.0;
    double query_fraction = 0.0;

    void validate() const;
    AttributeSchema schema() const;
};

// Gaussian cluster mixture with one dedicated feature axis per attribute.
// Identity centers sit at attribute-value offsets plus a per-identity jitter
// of scale 1.5 * noise_sigma on the non-attribute axes; every image adds
// isotropic noise of scale noise_sigma. Deterministic for a fixed config.
Dataset generate(const SynthConfig& config);

}  // namespace hreid
