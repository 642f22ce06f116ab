#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>
#include <sodium.h>

#include "cloudstore/fs_util.hpp"
#include "ecg/cloudstore.hpp"

namespace ecg::cloudstore {
namespace {

using nlohmann::json;

constexpr std::size_t kDigestBytes = 32;

void ensure_sodium() {
  static const int status = sodium_init();
  if (status < 0) throw std::runtime_error("libsodium failed to initialise");
}

std::string to_base64(const unsigned char* data, std::size_t len, int variant) {
  std::string out(sodium_base64_ENCODED_LEN(len, variant), '\0');
  sodium_bin2base64(out.data(), out.size(), data, len, variant);
  out.resize(std::strlen(out.c_str()));
  return out;
}

std::vector<unsigned char> from_base64(const std::string& text) {
  std::vector<unsigned char> out(text.size());
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw Error(ErrorCode::kSchemaError, "credential field is not valid base64");
  }
  out.resize(len);
  return out;
}

std::array<unsigned char, kDigestBytes> digest(const std::string& password, const unsigned char* salt,
                                               const HashParams& params) {
  std::array<unsigned char, kDigestBytes> out{};
  if (crypto_pwhash(out.data(), out.size(), password.data(), password.size(), salt, params.opslimit,
                    params.memlimit, crypto_pwhash_ALG_ARGON2ID13) != 0) {
    throw std::runtime_error("password hashing ran out of memory");
  }
  return out;
}

}  // namespace

HashParams HashParams::interactive() {
  return {crypto_pwhash_OPSLIMIT_INTERACTIVE, crypto_pwhash_MEMLIMIT_INTERACTIVE};
}

HashParams HashParams::minimal() { return {crypto_pwhash_OPSLIMIT_MIN, crypto_pwhash_MEMLIMIT_MIN}; }

CredentialStore::CredentialStore(HashParams params) : params_(params) { ensure_sodium(); }

CredentialStore::CredentialStore(CredentialStore&& other) noexcept
    : params_(other.params_), users_(std::move(other.users_)) {}

CredentialStore CredentialStore::load(const std::filesystem::path& path, HashParams params) {
  CredentialStore store(params);
  if (!std::filesystem::exists(path)) return store;
  std::ifstream in(path, std::ios::binary);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("users") || !j["users"].is_array()) {
    throw Error(ErrorCode::kSchemaError, "credentials file is malformed: " + path.string());
  }
  try {
    for (const json& u : j["users"]) {
      Credential c;
      c.username = u.at("username").get<std::string>();
      c.salt = u.at("salt").get<std::string>();
      c.password_hash = u.at("password_hash").get<std::string>();
      c.params.opslimit = u.at("opslimit").get<std::uint64_t>();
      c.params.memlimit = u.at("memlimit").get<std::size_t>();
      store.users_[c.username] = c;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, std::string("credentials file is malformed: ") + e.what());
  }
  return store;
}

void CredentialStore::save(const std::filesystem::path& path) const {
  json users = json::array();
  {
    std::lock_guard lock(mutex_);
    for (const auto& [name, c] : users_) {
      users.push_back({{"username", c.username},
                       {"salt", c.salt},
                       {"password_hash", c.password_hash},
                       {"opslimit", c.params.opslimit},
                       {"memlimit", c.params.memlimit}});
    }
  }
  const json doc = {{"users", std::move(users)}};
  detail::atomic_write(path, doc.dump(2) + "\n", 0600);
}

void CredentialStore::add_user(const std::string& username, const std::string& password) {
  if (username.empty() || password.empty()) {
    throw Error(ErrorCode::kInvalidParams, "username and password must be non-empty");
  }
  std::array<unsigned char, crypto_pwhash_SALTBYTES> salt{};
  randombytes_buf(salt.data(), salt.size());
  const auto d = digest(password, salt.data(), params_);
  Credential c{username, to_base64(salt.data(), salt.size(), sodium_base64_VARIANT_ORIGINAL),
               to_base64(d.data(), d.size(), sodium_base64_VARIANT_ORIGINAL), params_};
  std::lock_guard lock(mutex_);
  users_[username] = std::move(c);
}

bool CredentialStore::verify(const std::string& username, const std::string& password) const {
  std::optional<Credential> cred;
  {
    std::lock_guard lock(mutex_);
    if (auto it = users_.find(username); it != users_.end()) cred = it->second;
  }
  if (!cred) {
    // Same work as a real check so response time does not reveal accounts.
    const std::array<unsigned char, crypto_pwhash_SALTBYTES> salt{};
    const auto d = digest(password, salt.data(), params_);
    const std::array<unsigned char, kDigestBytes> other{};
    [[maybe_unused]] volatile int sink = sodium_memcmp(d.data(), other.data(), d.size());
    return false;
  }
  const auto salt = from_base64(cred->salt);
  const auto expected = from_base64(cred->password_hash);
  if (salt.size() != crypto_pwhash_SALTBYTES || expected.size() != kDigestBytes) return false;
  const auto d = digest(password, salt.data(), cred->params);
  return sodium_memcmp(d.data(), expected.data(), d.size()) == 0;
}

bool CredentialStore::contains(const std::string& username) const {
  std::lock_guard lock(mutex_);
  return users_.count(username) > 0;
}

std::size_t CredentialStore::size() const {
  std::lock_guard lock(mutex_);
  return users_.size();
}

SessionManager::SessionManager(std::chrono::seconds ttl, Now now) : ttl_(ttl), now_(std::move(now)) {
  ensure_sodium();
}

SessionToken SessionManager::issue(const std::string& username) {
  std::array<unsigned char, 16> raw{};
  randombytes_buf(raw.data(), raw.size());
  SessionToken t{to_base64(raw.data(), raw.size(), sodium_base64_VARIANT_URLSAFE_NO_PADDING), username,
                 now_() + ttl_};
  std::lock_guard lock(mutex_);
  sessions_[t.token] = t;
  return t;
}

std::optional<std::string> SessionManager::validate(const std::string& token) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(token);
  if (it == sessions_.end()) return std::nullopt;
  if (now_() >= it->second.expires_at) {
    sessions_.erase(it);
    return std::nullopt;
  }
  return it->second.username;
}

}  // namespace ecg::cloudstore
