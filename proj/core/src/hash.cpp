#include "figcap/hash.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>

#include "figcap/errors.hpp"

namespace figcap {

namespace {

std::string to_hex(const unsigned char* digest, std::size_t len) {
    static const char* kHex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0f]);
    }
    return out;
}

} // namespace

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    return to_hex(digest.data(), len);
}

std::string sha256_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot read file for hashing: " + path.string());

    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx)
        throw Error("sha256 context allocation failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);

    std::array<char, 1 << 16> buf;
    while (in.good()) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        if (got > 0)
            EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(got));
    }

    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest.data(), &len);
    EVP_MD_CTX_free(ctx);
    return to_hex(digest.data(), len);
}

std::uint64_t hex_prefix_u64(std::string_view hex) {
    std::uint64_t value = 0;
    const std::size_t n = hex.size() < 16 ? hex.size() : 16;
    for (std::size_t i = 0; i < n; ++i) {
        const char c = hex[i];
        std::uint64_t nibble = 0;
        if (c >= '0' && c <= '9')
            nibble = static_cast<std::uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f')
            nibble = static_cast<std::uint64_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F')
            nibble = static_cast<std::uint64_t>(c - 'A' + 10);
        else
            throw InvalidArgumentError("not a hex string");
        value = (value << 4) | nibble;
    }
    return value;
}

} // namespace figcap
