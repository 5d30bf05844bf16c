#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lime/netcore.hpp"

namespace lime::net {

namespace {

constexpr const char* kMagic = "LIME-CHECKPOINT";
constexpr int kVersion = 1;

void write_le_double(std::ostream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int i = 0; i < 8; ++i, bits >>= 8) buf[i] = static_cast<char>(bits & 0xff);
    out.write(buf, 8);
}

double read_le_double(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw std::runtime_error("checkpoint: truncated data section");
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | buf[i];
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store, const CheckpointHeader& header) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << kMagic << ' ' << kVersion << '\n';
    out << "seed " << header.seed << '\n';
    out << "config_hash " << header.config_hash << '\n';
    out << "params " << store.size() << '\n';
    for (const auto& p : store.params()) {
        out << "param " << p.name << ' ' << p.value.rank();
        for (const auto d : p.value.shape()) out << ' ' << d;
        out << '\n';
    }
    out << "data\n";
    for (const auto& p : store.params()) {
        for (const double v : p.value.values()) write_le_double(out, v);
    }
    if (!out) throw std::runtime_error("error writing checkpoint: " + path);
}

CheckpointHeader load_checkpoint(const std::string& path, ParamStore& store, std::string_view expected_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

    auto next_line = [&in, &path]() {
        std::string line;
        if (!std::getline(in, line)) throw std::runtime_error("checkpoint " + path + ": truncated header");
        return std::istringstream(line);
    };

    CheckpointHeader header;
    {
        auto ls = next_line();
        std::string magic;
        ls >> magic >> header.version;
        if (magic != kMagic) throw std::runtime_error("checkpoint " + path + ": bad magic");
        if (header.version != kVersion) {
            throw std::runtime_error("checkpoint " + path + ": unsupported version " +
                                     std::to_string(header.version));
        }
    }
    std::string key;
    next_line() >> key >> header.seed;
    next_line() >> key >> header.config_hash;
    if (!expected_hash.empty() && header.config_hash != expected_hash) {
        throw std::runtime_error("checkpoint " + path + ": config hash " + header.config_hash +
                                 " does not match current config " + std::string(expected_hash));
    }
    std::size_t count = 0;
    next_line() >> key >> count;
    if (count != store.size()) {
        throw std::runtime_error("checkpoint " + path + ": " + std::to_string(count) + " parameters, model has " +
                                 std::to_string(store.size()));
    }
    for (std::size_t i = 0; i < count; ++i) {
        auto ls = next_line();
        std::string name;
        std::size_t rank = 0;
        ls >> key >> name >> rank;
        Shape shape(rank);
        for (auto& d : shape) ls >> d;
        const auto& p = store.params()[i];
        if (key != "param" || name != p.name || shape != p.value.shape()) {
            throw std::runtime_error("checkpoint " + path + ": parameter " + name + " " + shape_string(shape) +
                                     " does not match model parameter " + p.name + " " +
                                     shape_string(p.value.shape()));
        }
    }
    next_line() >> key;
    if (key != "data") throw std::runtime_error("checkpoint " + path + ": missing data section");
    for (auto& p : store.params()) {
        for (auto& v : p.value.values()) v = read_le_double(in);
    }
    return header;
}

}  // namespace lime::net
