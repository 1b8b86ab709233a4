#include "faasguard/iam/iam.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace faasguard::iam {

bool Permission::matches(std::string_view act, std::string_view res) const {
  if (act != action) return false;
  if (wildcard()) return res.substr(0, prefix().size()) == prefix();
  return res == resource;
}

bool Permission::covers(const Permission& other) const {
  if (action != other.action) return false;
  if (wildcard()) {
    return other.prefix().substr(0, prefix().size()) == prefix();
  }
  return !other.wildcard() && resource == other.resource;
}

void PermissionGraph::add_role(Role r) {
  if (roles.count(r.role_id) != 0) {
    throw std::invalid_argument("duplicate role id: " + r.role_id);
  }
  for (const Permission& p : r.permissions) {
    const auto star = p.resource.find('*');
    if (star != std::string::npos && star != p.resource.size() - 1) {
      throw std::invalid_argument("wildcard must be the final character: " +
                                  p.resource);
    }
  }
  roles.emplace(r.role_id, std::move(r));
}

const Role& PermissionGraph::role(const std::string& role_id) const {
  auto it = roles.find(role_id);
  if (it == roles.end()) throw UnknownRoleError(role_id);
  return it->second;
}

void PermissionGraph::validate() const {
  for (const auto& [id, r] : roles) {
    for (const std::string& src : r.assumable_by) {
      if (!has_role(src)) {
        throw std::invalid_argument("role " + id + " assumable_by unknown role " + src);
      }
    }
    for (const Permission& p : r.permissions) {
      if (p.action == kAssumeRoleAction && !p.wildcard() && !has_role(p.resource)) {
        throw std::invalid_argument("role " + id + " assumes unknown role " +
                                    p.resource);
      }
    }
  }
}

Decision evaluate(const PermissionGraph& g, const std::string& role_id,
                  std::string_view action, std::string_view resource) {
  if (resource.find('*') != std::string_view::npos) {
    throw std::invalid_argument("evaluate: resource must be concrete");
  }
  const Role& r = g.role(role_id);  // throws UnknownRoleError
  for (const Permission& p : r.permissions) {
    if (p.matches(action, resource)) return Decision::kAllow;
  }
  return Decision::kDeny;
}

namespace {

bool grants(const Role& r, const Permission& target) {
  for (const Permission& p : r.permissions) {
    if (p.covers(target)) return true;
  }
  return false;
}

// Sorted outgoing assume edges of `from`: explicit AssumeRole permissions
// plus reverse assumable_by declarations.
std::vector<std::string> assume_edges(const PermissionGraph& g,
                                      const std::string& from) {
  std::set<std::string> out;
  const Role& r = g.role(from);
  for (const auto& [id, other] : g.roles) {
    if (id == from) continue;
    for (const Permission& p : r.permissions) {
      if (p.action == kAssumeRoleAction && p.matches(kAssumeRoleAction, id)) {
        out.insert(id);
        break;
      }
    }
    if (std::find(other.assumable_by.begin(), other.assumable_by.end(), from) !=
        other.assumable_by.end()) {
      out.insert(id);
    }
  }
  return {out.begin(), out.end()};
}

void dfs_all_paths(const PermissionGraph& g, const std::string& node,
                   const Permission& target, std::vector<std::string>& path,
                   std::set<std::string>& on_path,
                   std::vector<std::vector<std::string>>& out) {
  if (grants(g.role(node), target)) out.push_back(path);
  for (const std::string& next : assume_edges(g, node)) {
    if (on_path.count(next) != 0) continue;
    path.push_back(next);
    on_path.insert(next);
    dfs_all_paths(g, next, target, path, on_path, out);
    on_path.erase(next);
    path.pop_back();
  }
}

}  // namespace

std::vector<std::vector<std::string>> find_escalations(
    const PermissionGraph& g, const std::string& start_role,
    const Permission& target, bool all_paths) {
  (void)g.role(start_role);  // throws if missing

  std::vector<std::vector<std::string>> result;
  if (all_paths) {
    std::vector<std::string> path{start_role};
    std::set<std::string> on_path{start_role};
    dfs_all_paths(g, start_role, target, path, on_path, result);
    std::sort(result.begin(), result.end());
    return result;
  }

  // BFS layers with full parent sets, then path expansion over the BFS dag.
  std::map<std::string, std::size_t> dist;
  std::map<std::string, std::vector<std::string>> parents;
  std::deque<std::string> frontier{start_role};
  dist[start_role] = 0;
  while (!frontier.empty()) {
    const std::string node = frontier.front();
    frontier.pop_front();
    for (const std::string& next : assume_edges(g, node)) {
      auto it = dist.find(next);
      if (it == dist.end()) {
        dist[next] = dist[node] + 1;
        parents[next].push_back(node);
        frontier.push_back(next);
      } else if (it->second == dist[node] + 1) {
        parents[next].push_back(node);
      }
    }
  }

  std::size_t best = SIZE_MAX;
  for (const auto& [id, d] : dist) {
    if (d < best && grants(g.role(id), target)) best = d;
  }
  if (best == SIZE_MAX) return {};

  for (const auto& [id, d] : dist) {
    if (d != best || !grants(g.role(id), target)) continue;
    // Expand every shortest path back to the start.
    std::vector<std::vector<std::string>> partial{{id}};
    for (std::size_t step = 0; step < best; ++step) {
      std::vector<std::vector<std::string>> next;
      for (const auto& suffix : partial) {
        for (const std::string& par : parents[suffix.front()]) {
          std::vector<std::string> ext{par};
          ext.insert(ext.end(), suffix.begin(), suffix.end());
          next.push_back(std::move(ext));
        }
      }
      partial = std::move(next);
    }
    result.insert(result.end(), partial.begin(), partial.end());
  }
  std::sort(result.begin(), result.end());
  return result;
}

std::vector<Permission> excess_permissions(const PermissionGraph& g,
                                           const std::string& role_id,
                                           const AccessTrace& trace) {
  const Role& r = g.role(role_id);
  std::vector<Permission> excess;
  for (const Permission& p : r.permissions) {
    bool exercised = false;
    for (const auto& [action, resource] : trace.entries) {
      if (p.matches(action, resource)) {
        exercised = true;
        break;
      }
    }
    if (!exercised) excess.push_back(p);
  }
  std::sort(excess.begin(), excess.end());
  return excess;
}

PermissionGraph graph_from_json(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  PermissionGraph g;
  for (const auto& jr : j.at("roles")) {
    Role r;
    r.role_id = jr.at("role_id").get<std::string>();
    for (const auto& jp : jr.value("permissions", nlohmann::json::array())) {
      r.permissions.push_back(
          {jp.at("action").get<std::string>(), jp.at("resource").get<std::string>()});
    }
    for (const auto& ja : jr.value("assumable_by", nlohmann::json::array())) {
      r.assumable_by.push_back(ja.get<std::string>());
    }
    g.add_role(std::move(r));
  }
  g.validate();
  return g;
}

std::string graph_to_json(const PermissionGraph& g) {
  nlohmann::json roles = nlohmann::json::array();
  for (const auto& [id, r] : g.roles) {
    nlohmann::json perms = nlohmann::json::array();
    for (const Permission& p : r.permissions) {
      perms.push_back({{"action", p.action}, {"resource", p.resource}});
    }
    roles.push_back({{"role_id", id},
                     {"permissions", perms},
                     {"assumable_by", r.assumable_by}});
  }
  return nlohmann::json{{"roles", roles}}.dump(2);
}

}  // namespace faasguard::iam
