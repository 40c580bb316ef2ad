#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lta {

// Every failure the framework can report. Tool results carry the name of the
// code as their machine-readable reason, so the spelling is part of the trace
// format.
enum class Errc {
  // scene graph
  DuplicateName,
  UnknownParent,
  UnknownNode,
  TypeMismatch,
  WouldCreateCycle,
  NonFiniteValue,
  ParseError,
  SchemaError,
  // perception geometry
  InvalidDepth,
  OutOfBounds,
  EmptyCloud,
  NoMatch,
  NotVisible,
  // simulated world
  GripperOccupied,
  UnknownObject,
  GraspMissed,
  ObjectCovered,
  ObjectInsideClosedContainer,
  NotGraspable,
  GripperEmpty,
  OutOfWorkspace,
  PlacementCollision,
  GripperOccupiedDuringCapture,
  CaptureDropout,
  UnknownFaultKind,
  // model backends
  MalformedResponse,
  MissingLabel,
  UnsupportedPrompt,
  BackendUnavailable,
  AuthError,
  MalformedToolCall,
  // planner
  PlanParseError,
  InvalidConfiguration,
  InfeasibleGoal,
  // orchestrator
  UnknownTool,
  ArgSchemaError,
  UnresolvedPlaceholder,
  RejectedCall,
  PortInUse,
  SessionNotFound,
  InvalidTransition,
  // evaluation
  ScenarioParseError,
};

std::string_view to_string(Errc code);
Errc errc_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        double quantity = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message),
        quantity_(quantity) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  // Numeric payload for errors that carry one (GraspMissed distance).
  double quantity() const noexcept { return quantity_; }
  bool has_quantity() const noexcept { return !std::isnan(quantity_); }

 private:
  Errc code_;
  std::string detail_;
  double quantity_;
};

}  // namespace lta
