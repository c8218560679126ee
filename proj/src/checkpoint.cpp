#include "kge/checkpoint.hpp"

#include "kge/errors.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace kge {

namespace {

std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
    }
    return v;
}

class LineReader {
public:
    LineReader(std::string_view bytes, std::string_view origin) : bytes_(bytes), origin_(origin) {}

    std::string_view next() {
        if (pos_ >= bytes_.size()) fail("unexpected end of file");
        const auto nl = bytes_.find('\n', pos_);
        if (nl == std::string_view::npos) fail("unterminated line");
        std::string_view line = bytes_.substr(pos_, nl - pos_);
        pos_ = nl + 1;
        ++line_;
        return line;
    }

    std::size_t section(std::string_view name) {
        const std::string prefix = "[" + std::string(name) + "] ";
        std::string_view line = next();
        if (line.substr(0, prefix.size()) != prefix) fail("expected section " + prefix);
        return number(line.substr(prefix.size()));
    }

    std::size_t number(std::string_view text) {
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
            fail("expected a number, got '" + std::string(text) + "'");
        }
        return v;
    }

    std::string_view rest() const { return bytes_.substr(pos_); }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(std::string(origin_), line_, what); }

private:
    std::string_view bytes_;
    std::string_view origin_;
    std::size_t pos_ = 0;
    std::size_t line_ = 0;
};

} // namespace

const Tensor* Checkpoint::find(std::string_view name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t.tensor;
    }
    return nullptr;
}

const Tensor& Checkpoint::get(std::string_view name) const {
    const Tensor* t = find(name);
    if (t == nullptr) throw ConfigError("checkpoint has no tensor '" + std::string(name) + "'");
    return *t;
}

std::string Checkpoint::serialize() const {
    std::ostringstream out;
    out << kMagic << '\n';
    out << "[config] " << config.size() << '\n';
    for (const auto& [k, v] : config) out << k << '=' << v << '\n';
    out << "[entities] " << entities.size() << '\n';
    for (const auto& e : entities) out << e << '\n';
    out << "[relations] " << relations.size() << '\n';
    for (const auto& r : relations) out << r << '\n';
    out << "[tensors] " << tensors.size() << '\n';
    std::size_t offset = 0;
    std::set<std::string> names;
    for (const auto& t : tensors) {
        if (!names.insert(t.name).second) throw ContractError("checkpoint: duplicate tensor name " + t.name);
        out << t.name << '\t';
        const auto& shape = t.tensor.shape();
        for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? " " : "") << shape[i];
        out << '\t' << offset << '\t' << t.tensor.numel() << '\n';
        offset += t.tensor.numel() * sizeof(float);
    }
    out << "[blob] " << offset << '\n';
    std::string blob(offset, '\0');
    std::size_t at = 0;
    for (const auto& t : tensors) {
        for (float v : t.tensor.data()) {
            const std::uint32_t le = to_little_endian(std::bit_cast<std::uint32_t>(v));
            std::memcpy(blob.data() + at, &le, sizeof le);
            at += sizeof le;
        }
    }
    out << blob;
    return out.str();
}

Checkpoint Checkpoint::deserialize(std::string_view bytes, std::string_view origin) {
    LineReader in(bytes, origin);
    if (in.next() != kMagic) in.fail("not a checkpoint (missing '" + std::string(kMagic) + "')");
    Checkpoint ck;
    const std::size_t n_config = in.section("config");
    for (std::size_t i = 0; i < n_config; ++i) {
        std::string_view line = in.next();
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) in.fail("expected key=value");
        ck.config.emplace_back(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1)));
    }
    const std::size_t n_entities = in.section("entities");
    for (std::size_t i = 0; i < n_entities; ++i) ck.entities.emplace_back(in.next());
    const std::size_t n_relations = in.section("relations");
    for (std::size_t i = 0; i < n_relations; ++i) ck.relations.emplace_back(in.next());

    struct Entry {
        std::string name;
        Shape shape;
        std::size_t offset, count;
    };
    std::vector<Entry> entries;
    const std::size_t n_tensors = in.section("tensors");
    for (std::size_t i = 0; i < n_tensors; ++i) {
        std::string_view line = in.next();
        std::vector<std::string_view> cols;
        std::size_t start = 0;
        while (true) {
            const auto tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
            if (tab == std::string_view::npos) break;
            start = tab + 1;
        }
        if (cols.size() != 4) in.fail("manifest line needs 4 tab-separated fields");
        Entry e{std::string(cols[0]), {}, in.number(cols[2]), in.number(cols[3])};
        std::size_t s = 0;
        while (s < cols[1].size()) {
            auto sp = cols[1].find(' ', s);
            if (sp == std::string_view::npos) sp = cols[1].size();
            e.shape.push_back(in.number(cols[1].substr(s, sp - s)));
            s = sp + 1;
        }
        if (shape_numel(e.shape) != e.count) in.fail("element count does not match shape for " + e.name);
        entries.push_back(std::move(e));
    }
    const std::size_t blob_size = in.section("blob");
    std::string_view blob = in.rest();
    if (blob.size() != blob_size) in.fail("blob size mismatch");
    for (auto& e : entries) {
        if (e.offset + e.count * sizeof(float) > blob.size()) in.fail("tensor " + e.name + " overruns the blob");
        std::vector<float> values(e.count);
        for (std::size_t k = 0; k < e.count; ++k) {
            std::uint32_t le;
            std::memcpy(&le, blob.data() + e.offset + k * sizeof le, sizeof le);
            values[k] = std::bit_cast<float>(to_little_endian(le));
        }
        ck.tensors.push_back({e.name, Tensor::from(e.shape, std::move(values))});
    }
    return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
    const std::string bytes = serialize();
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write checkpoint " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DataError("failed writing checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::filesystem::path file = path;
    if (std::filesystem::is_directory(path)) file = path / kCheckpointFile;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + file.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string bytes = buffer.str();
    return deserialize(bytes, file.string());
}

std::uint64_t parameter_hash(const ParameterList& params) {
    // FNV-1a, 64-bit.
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& p : params) {
        mix(p.name.data(), p.name.size());
        for (std::size_t d : p.tensor.shape()) mix(&d, sizeof d);
        const auto data = p.tensor.data();
        mix(data.data(), data.size_bytes());
    }
    return h;
}

void check_dictionaries(const Checkpoint& checkpoint, const TripletStore& store) {
    auto compare = [](const std::vector<std::string>& saved, const std::vector<std::string>& current,
                      std::string_view what) {
        if (saved.size() != current.size()) {
            throw ConfigError(std::string(what) + " dictionary mismatch: checkpoint has " +
                              std::to_string(saved.size()) + ", dataset has " + std::to_string(current.size()));
        }
        for (std::size_t i = 0; i < saved.size(); ++i) {
            if (saved[i] != current[i]) {
                throw ConfigError(std::string(what) + " dictionary mismatch at index " + std::to_string(i) + ": '" +
                                  saved[i] + "' vs '" + current[i] + "'");
            }
        }
    };
    compare(checkpoint.entities, store.entities().names(), "entity");
    compare(checkpoint.relations, store.relations().names(), "relation");
}

} // namespace kge
