#pragma once

#include "kge/config.hpp"
#include "kge/kg_store.hpp"
#include "kge/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kge {

/// Serialized model state. File layout:
///   KGE-CKPT v1
///   [config] <n>        n lines "key=value"
///   [entities] <n>      n names, one per line
///   [relations] <n>     n names, one per line
///   [tensors] <n>       n lines "name<TAB>shape dims space-separated<TAB>byte offset<TAB>element count"
///   [blob] <bytes>      then the little-endian float32 payload
struct Checkpoint {
    static constexpr std::string_view kMagic = "KGE-CKPT v1";

    KeyValues config;
    std::vector<std::string> entities;
    std::vector<std::string> relations;
    ParameterList tensors; // detached copies

    const Tensor* find(std::string_view name) const;
    const Tensor& get(std::string_view name) const;

    std::string serialize() const;
    static Checkpoint deserialize(std::string_view bytes, std::string_view origin = "<memory>");

    void save(const std::filesystem::path& path) const;
    /// Accepts a checkpoint file or a directory containing checkpoint.kge.
    static Checkpoint load(const std::filesystem::path& path);
};

inline constexpr std::string_view kCheckpointFile = "checkpoint.kge";

/// Stable hash of names, shapes and raw values; used to audit frozen sets.
std::uint64_t parameter_hash(const ParameterList& params);

/// ConfigError unless the store's entity and relation dictionaries equal the
/// checkpoint's, index for index.
void check_dictionaries(const Checkpoint& checkpoint, const TripletStore& store);

} // namespace kge
