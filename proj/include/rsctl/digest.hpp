#pragma once

#include "rsctl/error.hpp"

#include <openssl/evp.h>

#include <memory>
#include <string>
#include <string_view>

namespace rsctl {

/// Lowercase hex SHA-256 of `bytes`.
inline std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    const bool ok = ctx && EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx.get(), out, &len) == 1;
    require(ok, ErrorCode::Io, "SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string s;
    s.reserve(2 * len);
    for (unsigned int k = 0; k < len; ++k) {
        s.push_back(hex[out[k] >> 4]);
        s.push_back(hex[out[k] & 0xF]);
    }
    return s;
}

}  // namespace rsctl
