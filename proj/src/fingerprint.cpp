#include "rdsa/fingerprint.hpp"

#include <openssl/evp.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "rdsa/error.hpp"

namespace rdsa {

namespace {

std::string hex(const unsigned char* digest, unsigned len) {
    static const char* alphabet = "0123456789abcdef";
    std::string out(2 * len, '0');
    for (unsigned i = 0; i < len; ++i) {
        out[2 * i] = alphabet[digest[i] >> 4];
        out[2 * i + 1] = alphabet[digest[i] & 0xf];
    }
    return out;
}

struct Sha256 {
    EVP_MD_CTX* ctx;
    Sha256() : ctx(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr); }
    ~Sha256() { EVP_MD_CTX_free(ctx); }
    void update(const void* data, std::size_t len) { EVP_DigestUpdate(ctx, data, len); }
    std::string finish() {
        unsigned char digest[EVP_MAX_MD_SIZE];
        unsigned len = 0;
        EVP_DigestFinal_ex(ctx, digest, &len);
        return hex(digest, len);
    }
};

}  // namespace

std::string sha256_hex(const void* data, std::size_t len) {
    Sha256 h;
    h.update(data, len);
    return h.finish();
}

std::string dataset_fingerprint(const Dataset& d) {
    Sha256 h;
    const std::uint64_t dims[2] = {d.features.rows(), d.features.cols()};
    h.update(dims, sizeof(dims));
    h.update(d.features.data(), d.features.size() * sizeof(double));
    h.update(d.labels.data(), d.labels.size() * sizeof(int));
    for (const auto& m : d.meta) {
        h.update(m.name.data(), m.name.size());
        const unsigned char cont = m.continuous ? 1 : 0;
        h.update(&cont, 1);
    }
    const std::int64_t k = d.num_classes;
    h.update(&k, sizeof(k));
    return h.finish();
}

std::string file_fingerprint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::data, ErrorCode::io_failure, "cannot open " + path.string());
    Sha256 h;
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.finish();
}

}  // namespace rdsa
