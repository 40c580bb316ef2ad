#include "lta/error.hpp"

#include <array>
#include <utility>

namespace lta {
namespace {

constexpr std::array<std::pair<Errc, std::string_view>, 42> kNames{{
    {Errc::DuplicateName, "DuplicateName"},
    {Errc::UnknownParent, "UnknownParent"},
    {Errc::UnknownNode, "UnknownNode"},
    {Errc::TypeMismatch, "TypeMismatch"},
    {Errc::WouldCreateCycle, "WouldCreateCycle"},
    {Errc::NonFiniteValue, "NonFiniteValue"},
    {Errc::ParseError, "ParseError"},
    {Errc::SchemaError, "SchemaError"},
    {Errc::InvalidDepth, "InvalidDepth"},
    {Errc::OutOfBounds, "OutOfBounds"},
    {Errc::EmptyCloud, "EmptyCloud"},
    {Errc::NoMatch, "NoMatch"},
    {Errc::NotVisible, "NotVisible"},
    {Errc::GripperOccupied, "GripperOccupied"},
    {Errc::UnknownObject, "UnknownObject"},
    {Errc::GraspMissed, "GraspMissed"},
    {Errc::ObjectCovered, "ObjectCovered"},
    {Errc::ObjectInsideClosedContainer, "ObjectInsideClosedContainer"},
    {Errc::NotGraspable, "NotGraspable"},
    {Errc::GripperEmpty, "GripperEmpty"},
    {Errc::OutOfWorkspace, "OutOfWorkspace"},
    {Errc::PlacementCollision, "PlacementCollision"},
    {Errc::GripperOccupiedDuringCapture, "GripperOccupiedDuringCapture"},
    {Errc::CaptureDropout, "CaptureDropout"},
    {Errc::UnknownFaultKind, "UnknownFaultKind"},
    {Errc::MalformedResponse, "MalformedResponse"},
    {Errc::MissingLabel, "MissingLabel"},
    {Errc::UnsupportedPrompt, "UnsupportedPrompt"},
    {Errc::BackendUnavailable, "BackendUnavailable"},
    {Errc::AuthError, "AuthError"},
    {Errc::MalformedToolCall, "MalformedToolCall"},
    {Errc::PlanParseError, "PlanParseError"},
    {Errc::InvalidConfiguration, "InvalidConfiguration"},
    {Errc::InfeasibleGoal, "InfeasibleGoal"},
    {Errc::UnknownTool, "UnknownTool"},
    {Errc::ArgSchemaError, "ArgSchemaError"},
    {Errc::UnresolvedPlaceholder, "UnresolvedPlaceholder"},
    {Errc::RejectedCall, "RejectedCall"},
    {Errc::PortInUse, "PortInUse"},
    {Errc::SessionNotFound, "SessionNotFound"},
    {Errc::InvalidTransition, "InvalidTransition"},
    {Errc::ScenarioParseError, "ScenarioParseError"},
}};

}  // namespace

std::string_view to_string(Errc code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

Errc errc_from_string(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  throw std::invalid_argument("unknown error code: " + std::string(name));
}

}  // namespace lta
