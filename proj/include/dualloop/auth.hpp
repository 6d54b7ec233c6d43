#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace dualloop {

enum class UserRole { Convener, Participant, Operator, Subject };

std::string_view to_string(UserRole r) noexcept;
std::optional<UserRole> user_role_from_string(std::string_view text) noexcept;

struct UserAccount {
  std::string id;
  std::string display_name;
  UserRole role = UserRole::Participant;
  std::string credential;  // libsodium pwhash string
};

// Minimal credential store with role claims. Accounts persist to
// <root>/users.json; bearer tokens live in memory only.
class UserStore {
 public:
  explicit UserStore(std::filesystem::path file);

  UserAccount register_user(const std::string& id, const std::string& display_name, UserRole role,
                            const std::string& password);  // throws Conflict / ValidationFailure
  std::string login(const std::string& id, const std::string& password);  // throws Unauthorized
  UserAccount authenticate(const std::string& token) const;                // throws Unauthorized
  std::optional<UserAccount> find(const std::string& id) const;

 private:
  void save() const;

  std::filesystem::path file_;
  mutable std::mutex mutex_;
  std::map<std::string, UserAccount> users_;
  std::map<std::string, std::string> tokens_;  // token -> user id
};

}  // namespace dualloop
