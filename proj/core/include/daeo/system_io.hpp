#pragma once

#include <stdexcept>
#include <string>

#include "daeo/lmi.hpp"
#include "daeo/model.hpp"
#include "daeo/synth.hpp"
#include "daeo/types.hpp"

namespace daeo {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// On-disk system description (strict JSON schema, versioned). Matrices are
// arrays of row arrays of finite numbers; nonlinearities are expression
// strings in the grammar of expr.hpp; unknown fields are rejected.
struct SystemFile {
  int format_version = 1;
  std::string name;  // empty when absent

  DaeSystem sys;

  bool has_u = false;
  VectorFunction u;  // input signal, expressions of t only

  bool has_gains = false;
  ObserverGains gains;

  bool has_certificate = false;
  Mat P;
  Mat K;
  bool has_delta = false;
  double delta = 1.0;

  bool has_sampling = false;
  SamplingPlan sampling;

  bool has_solver = false;
  SolveOptions solver;

  // Certificate from the optional (P, K, delta) block; throws IoError when
  // the file carries none.
  LmiCertificate certificate() const;
};

SystemFile parse_system_text(const std::string& text,
                             const std::string& origin);
SystemFile load_system(const std::string& path);

std::string system_to_json_text(const SystemFile& sf);
void save_system(const std::string& path, const SystemFile& sf);

// Report serializations: machine-readable JSON and aligned text.
std::string report_to_json_text(const CertificateReport& rep);
std::string report_to_text(const CertificateReport& rep);

}  // namespace daeo
