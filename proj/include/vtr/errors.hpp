#pragma once

#include <stdexcept>
#include <string>

namespace vtr {

struct FrameMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotSpdError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonPositiveDisparityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyWorldError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateFitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Map file could not be parsed or has missing/ill-typed fields.
struct MapFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Map file parsed but carries an unsupported schema version.
struct MapVersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Localization broke down during the teach pass; carries where and which camera.
struct TeachFailureError : std::runtime_error {
  TeachFailureError(double t, const std::string& camera, const std::string& what)
      : std::runtime_error("teach failure at t=" + std::to_string(t) + "s, camera '" +
                           camera + "': " + what),
        time(t),
        camera(camera) {}
  double time;
  std::string camera;
};

}  // namespace vtr
