#pragma once

#include "kge/decoders.hpp"
#include "kge/samplers.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kge {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Training settings. Defaults are the reference operating point: lr 1e-3,
/// batch 1000, 20 negatives of which 10 generated, 5 generator and 1
/// discriminator steps per batch with lr 1e-3 / 1e-4, lambda 1e-4, d 100.
struct TrainConfig {
    std::size_t pretrain_epochs = 0;
    std::size_t epochs = 2000;
    std::size_t batch_size = 1000;
    float lr_base = 1e-3f;
    float lr_gen = 1e-3f;
    float lr_disc = 1e-4f;
    std::size_t gen_steps_per_batch = 5;
    std::size_t disc_steps_per_batch = 1;
    float lambda = 1e-4f;
    SamplerConfig sampler;
    DecoderMode decoder = DecoderMode::DistMult;
    std::uint64_t seed = 1;
    std::size_t dim = 100;
    std::size_t num_layers = 2;
    std::size_t generator_layers = 2;
    float rotate_margin = 12.0f;
    bool complex_conjugate = true;
    std::size_t checkpoint_every = 0; // epochs between intermediate checkpoints; 0 = final only

    void validate() const;
    /// Whether the generator and discriminator exist at all for this config.
    bool uses_gan() const { return sampler.strategy == Strategy::Dans; }
};

/// Every accepted key, in serialization order.
const std::vector<std::string>& config_keys();

void set_config_value(TrainConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const TrainConfig& config, std::string_view key);
KeyValues to_key_values(const TrainConfig& config);
TrainConfig from_key_values(const KeyValues& values);

/// Parses `key = value` lines; '#' starts a comment. Unknown keys are not
/// checked here; duplicate keys and lines without '=' raise ConfigError.
KeyValues parse_key_values(std::string_view text, std::string_view origin);

/// Defaults overridden by the file; unknown or duplicate keys raise ConfigError.
TrainConfig load_config_file(const std::filesystem::path& path);

/// Applies KGE_SEED from the environment if set.
void apply_seed_environment(TrainConfig& config);

} // namespace kge
