#include "dualloop/auth.hpp"

#include "dualloop/error.hpp"
#include "dualloop/store.hpp"

#include <json.hpp>
#include <sodium.h>

#include <array>
#include <fstream>

namespace dualloop {

namespace {

constexpr std::array<std::pair<UserRole, std::string_view>, 4> kRoleNames{{
    {UserRole::Convener, "Convener"},
    {UserRole::Participant, "Participant"},
    {UserRole::Operator, "Operator"},
    {UserRole::Subject, "Subject"},
}};

void init_sodium() {
  static const int status = sodium_init();
  if (status < 0) throw std::runtime_error("libsodium failed to initialize");
}

std::string new_token() {
  std::array<unsigned char, 32> raw{};
  randombytes_buf(raw.data(), raw.size());
  std::array<char, 65> hex{};
  sodium_bin2hex(hex.data(), hex.size(), raw.data(), raw.size());
  return hex.data();
}

}  // namespace

std::string_view to_string(UserRole r) noexcept {
  for (const auto& [role, name] : kRoleNames) {
    if (role == r) return name;
  }
  return "?";
}

std::optional<UserRole> user_role_from_string(std::string_view text) noexcept {
  for (const auto& [role, name] : kRoleNames) {
    if (name == text) return role;
  }
  return std::nullopt;
}

UserStore::UserStore(std::filesystem::path file) : file_(std::move(file)) {
  init_sodium();
  std::ifstream in(file_);
  if (!in) return;
  const auto doc = nlohmann::json::parse(in);
  for (const auto& u : doc.at("users")) {
    const auto role = user_role_from_string(u.at("role").get<std::string>());
    if (!role) throw Error(ErrorCode::ValidationFailure, "user store has an unknown role");
    const auto id = u.at("id").get<std::string>();
    users_[id] = UserAccount{id, u.value("display_name", std::string{}), *role, u.at("credential").get<std::string>()};
  }
}

void UserStore::save() const {
  nlohmann::json users = nlohmann::json::array();
  for (const auto& [id, u] : users_) {
    users.push_back({{"id", u.id},
                     {"display_name", u.display_name},
                     {"role", std::string(to_string(u.role))},
                     {"credential", u.credential}});
  }
  const auto tmp = file_.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << nlohmann::json{{"users", users}}.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, file_);
}

UserAccount UserStore::register_user(const std::string& id, const std::string& display_name, UserRole role,
                                     const std::string& password) {
  if (!valid_id(id)) throw Error(ErrorCode::ValidationFailure, "invalid user id '" + id + "'", "/id");
  if (password.size() < 8) throw Error(ErrorCode::ValidationFailure, "password must have at least 8 characters", "/password");
  std::array<char, crypto_pwhash_STRBYTES> hashed{};
  if (crypto_pwhash_str(hashed.data(), password.data(), password.size(), crypto_pwhash_OPSLIMIT_INTERACTIVE,
                        crypto_pwhash_MEMLIMIT_INTERACTIVE) != 0) {
    throw std::runtime_error("password hashing ran out of memory");
  }
  std::lock_guard lock(mutex_);
  if (users_.count(id)) throw Error(ErrorCode::Conflict, "user '" + id + "' already exists", id);
  UserAccount a{id, display_name.empty() ? id : display_name, role, hashed.data()};
  users_[id] = a;
  save();
  return a;
}

std::string UserStore::login(const std::string& id, const std::string& password) {
  std::string credential;
  {
    std::lock_guard lock(mutex_);
    const auto it = users_.find(id);
    if (it == users_.end()) throw Error(ErrorCode::Unauthorized, "unknown user or wrong password");
    credential = it->second.credential;
  }
  // Verification is slow by design; keep it outside the lock.
  if (crypto_pwhash_str_verify(credential.c_str(), password.data(), password.size()) != 0) {
    throw Error(ErrorCode::Unauthorized, "unknown user or wrong password");
  }
  std::lock_guard lock(mutex_);
  auto token = new_token();
  tokens_[token] = id;
  return token;
}

UserAccount UserStore::authenticate(const std::string& token) const {
  std::lock_guard lock(mutex_);
  const auto it = tokens_.find(token);
  if (it == tokens_.end()) throw Error(ErrorCode::Unauthorized, "missing or invalid bearer token");
  return users_.at(it->second);
}

std::optional<UserAccount> UserStore::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = users_.find(id);
  if (it == users_.end()) return std::nullopt;
  return it->second;
}

}  // namespace dualloop
