#include "schemasift/text.h"

#include "schemasift/error.h"

namespace schemasift {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::Parse: return "parse error";
        case ErrorCode::DanglingReference: return "dangling reference";
        case ErrorCode::InvalidArgument: return "invalid argument";
        case ErrorCode::UnsupportedSyntax: return "unsupported syntax";
        case ErrorCode::AmbiguousColumn: return "ambiguous column";
        case ErrorCode::UnknownColumn: return "unknown column";
        case ErrorCode::UnknownTable: return "unknown table";
        case ErrorCode::EmptyPositives: return "empty positives";
        case ErrorCode::KeyConflict: return "key conflict";
        case ErrorCode::Corruption: return "corruption";
        case ErrorCode::VersionMismatch: return "version mismatch";
        case ErrorCode::ShapeMismatch: return "shape mismatch";
        case ErrorCode::DimensionMismatch: return "dimension mismatch";
        case ErrorCode::NumericFailure: return "numeric failure";
        case ErrorCode::Divergence: return "divergence";
        case ErrorCode::ProviderUnavailable: return "provider unavailable";
        case ErrorCode::MalformedResponse: return "malformed response";
        case ErrorCode::OverCapacity: return "over capacity";
        case ErrorCode::MissingArtifact: return "missing artifact";
        case ErrorCode::Io: return "i/o error";
    }
    return "error";
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        char x = a[i], y = b[i];
        if (x >= 'A' && x <= 'Z') x = static_cast<char>(x - 'A' + 'a');
        if (y >= 'A' && y <= 'Z') y = static_cast<char>(y - 'A' + 'a');
        if (x != y) return false;
    }
    return true;
}

static bool is_word_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        size_t start = i;
        while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) tokens.push_back(to_lower(text.substr(start, i - start)));
    }
    return tokens;
}

uint64_t fnv1a64(std::string_view data, uint64_t salt) {
    uint64_t h = 0xcbf29ce484222325ULL ^ mix64(salt);
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    size_t start = 0;
    for (size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            parts.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return parts;
}

}  // namespace schemasift
