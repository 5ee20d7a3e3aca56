#include "hreid/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "hreid/errors.hpp"
#include "hreid/rng.hpp"

namespace hreid {

void SynthConfig::validate() const {
    if (n_identities <= 0) throw ValidationError("synth: n_identities must be positive");
    if (images_per_identity <= 0) throw ValidationError("synth: images_per_identity must be positive");
    if (feature_dim <= 0) throw ValidationError("synth: feature_dim must be positive");
    if (attributes.empty()) throw ValidationError("synth: at least one attribute required");
    if (feature_dim < static_cast<int>(attributes.size()))
        throw ValidationError("synth: feature_dim must be >= number of attributes");
    if (noise_sigma <= 0.0) throw ValidationError("synth: noise_sigma must be positive");
    const double total = train_fraction + gallery_fraction + query_fraction;
    if (std::abs(total - 1.0) > 1e-9)
        throw ValidationError("synth: split fractions must sum to 1");
    if (train_fraction < 0 || gallery_fraction < 0 || query_fraction < 0)
        throw ValidationError("synth: split fractions must be non-negative");
    if (query_fraction > 0 && gallery_fraction == 0)
        throw ValidationError("synth: queries without a gallery are unanswerable");
    for (std::size_t i = 0; i < attributes.size(); ++i) {
        const auto& a = attributes[i];
        if (a.separation < 0) throw ValidationError("synth: separation must be non-negative");
        if (i == 0 && a.correlation_with_previous)
            throw ValidationError("synth: first attribute cannot correlate with a previous one");
        if (a.correlation_with_previous &&
            (*a.correlation_with_previous < 0.0 || *a.correlation_with_previous > 1.0))
            throw ValidationError("synth: correlation_with_previous must be in [0, 1]");
    }
    schema().validate();
}

AttributeSchema SynthConfig::schema() const {
    AttributeSchema s;
    for (const auto& a : attributes) s.attributes.push_back({a.name, a.values});
    return s;
}

namespace {

std::string zero_pad(int value, int width) {
    std::string s = std::to_string(value);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

// largest-remainder allocation of n images over the three split fractions
struct SplitCounts {
    int train = 0, gallery = 0, query = 0;
};

SplitCounts allocate_splits(int n, const SynthConfig& cfg) {
    const double quota[3] = {n * cfg.train_fraction, n * cfg.gallery_fraction, n * cfg.query_fraction};
    int base[3];
    double frac[3];
    int used = 0;
    for (int i = 0; i < 3; ++i) {
        base[i] = static_cast<int>(std::floor(quota[i]));
        frac[i] = quota[i] - base[i];
        used += base[i];
    }
    int rem = n - used;
    // ties broken in fixed order train, gallery, query
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (int k = 0; k < rem; ++k) ++base[order[static_cast<std::size_t>(k % 3)]];
    SplitCounts c{base[0], base[1], base[2]};
    // every query identity must keep at least one gallery image
    if (c.query > 0 && c.gallery == 0) {
        if (c.train > 0)
            --c.train;
        else
            --c.query;
        ++c.gallery;
    }
    return c;
}

}  // namespace

Dataset generate(const SynthConfig& config) {
    config.validate();
    const int n_attrs = static_cast<int>(config.attributes.size());
    const int d = config.feature_dim;

    Dataset ds;
    ds.schema = config.schema();
    ds.feature_dim = d;

    Rng rng(derive_seed(config.seed, "synthgen"));

    // identity jitter lives on the non-attribute axes so it distinguishes
    // identities without blurring the attribute clusters; 1.5x the image
    // noise keeps the hardest same-identity pair closer than the nearest
    // impostor, which batch-hard training needs to converge
    const double jitter_sigma = 1.5 * config.noise_sigma;
    const int jitter_start = d > n_attrs ? n_attrs : 0;
    int sample_counter = 0;

    for (int id = 0; id < config.n_identities; ++id) {
        // attribute chain: first uniform, later ones copy their predecessor
        // with the configured probability
        std::vector<int> values(static_cast<std::size_t>(n_attrs));
        for (int a = 0; a < n_attrs; ++a) {
            const auto& attr = config.attributes[static_cast<std::size_t>(a)];
            const int n_vals = static_cast<int>(attr.values.size());
            bool copied = false;
            if (a > 0 && attr.correlation_with_previous) {
                if (rng.uniform01() < *attr.correlation_with_previous) {
                    values[static_cast<std::size_t>(a)] =
                        values[static_cast<std::size_t>(a - 1)] % n_vals;
                    copied = true;
                }
            }
            if (!copied)
                values[static_cast<std::size_t>(a)] = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_vals)));
        }

        std::vector<double> center(static_cast<std::size_t>(d), 0.0);
        for (int a = 0; a < n_attrs; ++a) {
            const auto& attr = config.attributes[static_cast<std::size_t>(a)];
            const double k = static_cast<double>(attr.values.size());
            const double v = static_cast<double>(values[static_cast<std::size_t>(a)]);
            center[static_cast<std::size_t>(a)] += (v - (k - 1.0) / 2.0) * attr.separation;
        }
        for (int k = jitter_start; k < d; ++k)
            center[static_cast<std::size_t>(k)] += jitter_sigma * rng.normal();

        std::vector<std::vector<float>> images;
        images.reserve(static_cast<std::size_t>(config.images_per_identity));
        for (int img = 0; img < config.images_per_identity; ++img) {
            std::vector<float> x(static_cast<std::size_t>(d));
            for (int k = 0; k < d; ++k)
                x[static_cast<std::size_t>(k)] = static_cast<float>(
                    center[static_cast<std::size_t>(k)] + config.noise_sigma * rng.normal());
            images.push_back(std::move(x));
        }

        const SplitCounts counts = allocate_splits(config.images_per_identity, config);
        std::vector<int> order(static_cast<std::size_t>(config.images_per_identity));
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);

        const std::string identity = "id" + zero_pad(id, 4);
        for (int j = 0; j < config.images_per_identity; ++j) {
            const int img = order[static_cast<std::size_t>(j)];
            Sample s;
            s.sample_id = "s" + zero_pad(sample_counter++, 6);
            s.identity_id = identity;
            s.camera_id = "c" + std::to_string(img % 4);
            s.split = j < counts.train                  ? Split::train
                      : j < counts.train + counts.gallery ? Split::gallery
                                                          : Split::query;
            s.attribute_values = values;
            s.features = std::move(images[static_cast<std::size_t>(img)]);
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

}  // namespace hreid
