#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace faasguard::iam {

/// One (action, resource) grant. The resource may end in a single trailing
/// "*" wildcard; the wildcard never appears anywhere else.
struct Permission {
  std::string action;
  std::string resource;

  bool wildcard() const {
    return !resource.empty() && resource.back() == '*';
  }
  std::string_view prefix() const {
    std::string_view v = resource;
    if (wildcard()) v.remove_suffix(1);
    return v;
  }
  // True when this permission grants access to the concrete `res`.
  bool matches(std::string_view act, std::string_view res) const;
  // True when the set of resources this permission grants is a superset of
  // the set `other` grants (same action required).
  bool covers(const Permission& other) const;

  auto operator<=>(const Permission&) const = default;
};

struct Role {
  std::string role_id;
  std::vector<Permission> permissions;
  std::vector<std::string> assumable_by;
};

struct PermissionGraph {
  std::map<std::string, Role> roles;

  void add_role(Role r);
  const Role& role(const std::string& role_id) const;
  bool has_role(const std::string& role_id) const {
    return roles.count(role_id) != 0;
  }
  // Checks that every assumable_by entry and every iam:AssumeRole resource
  // resolves to an existing role.
  void validate() const;
};

/// Ordered (action, concrete resource) pairs observed while a function ran.
struct AccessTrace {
  std::vector<std::pair<std::string, std::string>> entries;
};

enum class Decision { kAllow, kDeny };

// Allow iff some permission of the role matches action exactly and the
// concrete resource exactly or by prefix-before-"*".
// Throws UnknownRoleError for missing roles (distinct from deny).
Decision evaluate(const PermissionGraph& g, const std::string& role_id,
                  std::string_view action, std::string_view resource);

struct UnknownRoleError : std::runtime_error {
  explicit UnknownRoleError(const std::string& role_id)
      : std::runtime_error("unknown role: " + role_id) {}
};

// Breadth-first escalation search over assume edges. Returns every shortest
// path from start_role to a role granting `target`, lexicographically
// sorted; a zero-length path [start_role] when the start role already
// grants it; empty when unreachable. With all_paths, enumerates every
// simple path to a granting role instead (test oracle hook).
std::vector<std::vector<std::string>> find_escalations(
    const PermissionGraph& g, const std::string& start_role,
    const Permission& target, bool all_paths = false);

// Permissions of the role not exercised by any trace entry. A wildcard
// permission counts as exercised iff at least one entry matches it.
std::vector<Permission> excess_permissions(const PermissionGraph& g,
                                           const std::string& role_id,
                                           const AccessTrace& trace);

// Assume-role action name used for edge derivation.
inline constexpr std::string_view kAssumeRoleAction = "iam:AssumeRole";

// JSON fixture format: {"roles":[{"role_id","permissions":[{"action","resource"}],
// "assumable_by":[...]}]}.
PermissionGraph graph_from_json(const std::string& json_text);
std::string graph_to_json(const PermissionGraph& g);

}  // namespace faasguard::iam
