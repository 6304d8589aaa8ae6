#pragma once

#include <stdexcept>
#include <string>

namespace adagraph {

// Every failure raised by the library derives from Error so callers can
// catch the whole family at once.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ADAGRAPH_DEFINE_ERROR(Name)      \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

ADAGRAPH_DEFINE_ERROR(DimensionError);
ADAGRAPH_DEFINE_ERROR(InvalidMetadata);
ADAGRAPH_DEFINE_ERROR(DuplicateNode);
ADAGRAPH_DEFINE_ERROR(InvalidGraph);
ADAGRAPH_DEFINE_ERROR(EmptyGraphError);
ADAGRAPH_DEFINE_ERROR(UnknownDomain);
ADAGRAPH_DEFINE_ERROR(InsufficientBatch);
ADAGRAPH_DEFINE_ERROR(LabelError);
ADAGRAPH_DEFINE_ERROR(InvalidState);
ADAGRAPH_DEFINE_ERROR(EmptyDataset);
ADAGRAPH_DEFINE_ERROR(DegenerateTask);
ADAGRAPH_DEFINE_ERROR(NodeSetMismatch);
ADAGRAPH_DEFINE_ERROR(BufferNotReady);
ADAGRAPH_DEFINE_ERROR(ConfigError);
ADAGRAPH_DEFINE_ERROR(FormatError);

#undef ADAGRAPH_DEFINE_ERROR

}  // namespace adagraph
