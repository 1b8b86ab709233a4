#include "faasguard/sim/types.hpp"

#include <stdexcept>

namespace faasguard::sim {

std::string trigger_name(Trigger t) {
  switch (t) {
    case Trigger::kHttp: return "http";
    case Trigger::kQueue: return "queue";
    case Trigger::kStorage: return "storage";
    case Trigger::kSchedule: return "schedule";
  }
  return "http";
}

Trigger trigger_from_name(const std::string& name) {
  if (name == "http") return Trigger::kHttp;
  if (name == "queue") return Trigger::kQueue;
  if (name == "storage") return Trigger::kStorage;
  if (name == "schedule") return Trigger::kSchedule;
  throw std::invalid_argument("unknown trigger: " + name);
}

std::string attack_kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::kColdProbe: return "cold_probe";
    case AttackKind::kExhaustion: return "exhaustion";
    case AttackKind::kReuseLeak: return "reuse_leak";
    case AttackKind::kDependencyPoison: return "dependency_poison";
    case AttackKind::kExtraction: return "extraction";
    case AttackKind::kAdversarial: return "adversarial";
    case AttackKind::kMembership: return "membership";
    case AttackKind::kRoleChain: return "role_chain";
    case AttackKind::kEventInjection: return "event_injection";
    case AttackKind::kDenialOfWallet: return "denial_of_wallet";
    case AttackKind::kPersistence: return "persistence";
  }
  return "cold_probe";
}

AttackKind attack_kind_from_name(const std::string& name) {
  if (name == "cold_probe") return AttackKind::kColdProbe;
  if (name == "exhaustion") return AttackKind::kExhaustion;
  if (name == "reuse_leak") return AttackKind::kReuseLeak;
  if (name == "dependency_poison") return AttackKind::kDependencyPoison;
  if (name == "extraction") return AttackKind::kExtraction;
  if (name == "adversarial") return AttackKind::kAdversarial;
  if (name == "membership") return AttackKind::kMembership;
  if (name == "role_chain") return AttackKind::kRoleChain;
  if (name == "event_injection") return AttackKind::kEventInjection;
  if (name == "denial_of_wallet") return AttackKind::kDenialOfWallet;
  if (name == "persistence") return AttackKind::kPersistence;
  throw std::invalid_argument("unknown attack kind: " + name);
}

std::string invocation_error_name(InvocationError e) {
  switch (e) {
    case InvocationError::kTimeout: return "timeout";
    case InvocationError::kThrottled: return "throttled";
    case InvocationError::kRejectedByShield: return "rejected_by_shield";
    case InvocationError::kHandlerFault: return "handler_fault";
  }
  return "timeout";
}

}  // namespace faasguard::sim
