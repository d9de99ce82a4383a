#pragma once

#include <detcbor/cose.hpp>

#include <openssl/evp.h>

namespace detcbor::cose {

// Ed25519 via OpenSSL's one-shot EVP interface. Raw 32-byte keys, 64-byte
// signatures. Link against libcrypto when using this header.
inline crypto_provider openssl_ed25519_provider() {
    crypto_provider cp;
    cp.sign = [](bview sk, bview msg) -> std::vector<byte> {
        std::vector<byte> sig;
        if (sk.size() != 32) return sig;
        EVP_PKEY* key = EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, sk.data(),
                                                     sk.size());
        if (!key) return sig;
        EVP_MD_CTX* ctx = EVP_MD_CTX_new();
        sig.resize(64);
        size_t n = sig.size();
        static const byte empty[1] = {0};
        const byte* m = msg.empty() ? empty : msg.data();
        if (!ctx || EVP_DigestSignInit(ctx, nullptr, nullptr, nullptr, key) != 1 ||
            EVP_DigestSign(ctx, sig.data(), &n, m, msg.size()) != 1 || n != 64)
            sig.clear();
        EVP_MD_CTX_free(ctx);
        EVP_PKEY_free(key);
        return sig;
    };
    cp.verify = [](bview pk, bview msg, bview sig) -> bool {
        if (pk.size() != 32 || sig.size() != 64) return false;
        EVP_PKEY* key = EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, pk.data(),
                                                    pk.size());
        if (!key) return false;
        EVP_MD_CTX* ctx = EVP_MD_CTX_new();
        static const byte empty[1] = {0};
        const byte* m = msg.empty() ? empty : msg.data();
        bool ok = ctx && EVP_DigestVerifyInit(ctx, nullptr, nullptr, nullptr, key) == 1 &&
                  EVP_DigestVerify(ctx, sig.data(), sig.size(), m, msg.size()) == 1;
        EVP_MD_CTX_free(ctx);
        EVP_PKEY_free(key);
        return ok;
    };
    return cp;
}

// Raw public key derived from a raw private key.
inline std::vector<byte> openssl_ed25519_public_key(bview sk) {
    std::vector<byte> pk;
    if (sk.size() != 32) return pk;
    EVP_PKEY* key = EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, sk.data(), sk.size());
    if (!key) return pk;
    pk.resize(32);
    size_t n = pk.size();
    if (EVP_PKEY_get_raw_public_key(key, pk.data(), &n) != 1 || n != 32) pk.clear();
    EVP_PKEY_free(key);
    return pk;
}

}  // namespace detcbor::cose
