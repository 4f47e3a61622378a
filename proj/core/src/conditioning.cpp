#include "simgraph/conditioning.hpp"

#include <string>

#include "simgraph/error.hpp"

namespace simgraph::conditioning {

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

// ASCII only; bytes outside [0-9A-Za-z] separate tokens.
bool is_token_char(unsigned char c) noexcept {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

char to_lower(unsigned char c) noexcept {
    return static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c);
}

}  // namespace

TextEmbedding encode_text(std::string_view text, std::size_t d) {
    if (d == 0) throw ValidationError("embedding dimension must be positive");

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        const std::uint64_t h = fnv1a64(token);
        const double sign = (h >> 63) == 0 ? 1.0 : -1.0;
        acc[static_cast<Eigen::Index>(h % d)] += sign;
        token.clear();
    };
    for (unsigned char c : text) {
        if (is_token_char(c)) {
            token.push_back(to_lower(c));
        } else {
            flush();
        }
    }
    flush();

    const double norm = acc.norm();
    if (norm > 0.0) acc /= norm;
    return {std::move(acc)};
}

}  // namespace simgraph::conditioning
