#pragma once

#include <stdexcept>
#include <string>

namespace halo {

// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// latent editing
class NoImageTokens : public Error { public: using Error::Error; };
class NonContiguousSpan : public Error { public: using Error::Error; };
class DimensionMismatch : public Error { public: using Error::Error; };
class InvalidSpan : public Error { public: using Error::Error; };
class InvalidStrategy : public Error { public: using Error::Error; };
class EmptyMatrix : public Error { public: using Error::Error; };

// pipeline / backends
class InvalidParameter : public Error { public: using Error::Error; };
class UnknownObject : public Error { public: using Error::Error; };
class BackendFailure : public Error { public: using Error::Error; };
class EmptyCaption : public Error { public: using Error::Error; };
class ShapeMismatch : public Error { public: using Error::Error; };
class CapabilityError : public Error { public: using Error::Error; };

// metrics
class MissingAnnotation : public Error { public: using Error::Error; };
class EmptyCorpus : public Error { public: using Error::Error; };
class OutOfRange : public Error { public: using Error::Error; };
class EmptyInput : public Error { public: using Error::Error; };
class MalformedPairing : public Error { public: using Error::Error; };
class CorpusMismatch : public Error { public: using Error::Error; };

// harness / io
class SchemaVersionMismatch : public Error { public: using Error::Error; };

// Dataset file failed to parse; carries the offending line.
class DatasetParseError : public Error {
public:
  DatasetParseError(const std::string& path, long line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what),
        path_(path), line_(line) {}
  const std::string& path() const { return path_; }
  long line() const { return line_; }

private:
  std::string path_;
  long line_;
};

// A run failed partway but every completed record was persisted;
// rerunning with resume enabled continues from the persisted records.
class PartialRunResumable : public Error {
public:
  PartialRunResumable(long completed, const std::string& cause)
      : Error("run interrupted after " + std::to_string(completed) +
              " persisted records (resume to continue): " + cause),
        completed_(completed) {}
  long completed() const { return completed_; }

private:
  long completed_;
};

}  // namespace halo
