#pragma once

#include <stdexcept>
#include <string>

namespace nfx {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define NFX_DEFINE_ERROR(Name)                                                 \
    struct Name : Error {                                                      \
        explicit Name(const std::string& msg) : Error(#Name ": " + msg) {}     \
    }

// audio_io
NFX_DEFINE_ERROR(MalformedWav);
NFX_DEFINE_ERROR(UnsupportedFormat);
NFX_DEFINE_ERROR(IoError);
NFX_DEFINE_ERROR(SchemaError);
NFX_DEFINE_ERROR(SampleRateMismatch);
NFX_DEFINE_ERROR(LengthMismatch);
NFX_DEFINE_ERROR(OutOfRange);
NFX_DEFINE_ERROR(EmptySplit);

// dsp_core
NFX_DEFINE_ERROR(NonPowerOfTwo);
NFX_DEFINE_ERROR(SignalTooShort);
NFX_DEFINE_ERROR(FrequencyOutOfRange);
NFX_DEFINE_ERROR(CoefficientOutOfRange);

// nn_core / backbones / conditioning
NFX_DEFINE_ERROR(ShapeMismatch);
NFX_DEFINE_ERROR(UnsupportedSpec);
NFX_DEFINE_ERROR(ConditionDimMismatch);
NFX_DEFINE_ERROR(LayoutMismatch);

// losses
NFX_DEFINE_ERROR(SilentTarget);

// metrics
NFX_DEFINE_ERROR(TooShort);
NFX_DEFINE_ERROR(SilentSignal);

// sys_analysis
NFX_DEFINE_ERROR(WindowOutOfRange);
NFX_DEFINE_ERROR(DegenerateEnergy);

// runner_cli
NFX_DEFINE_ERROR(UnknownKey);
NFX_DEFINE_ERROR(VersionMismatch);
NFX_DEFINE_ERROR(CorruptPayload);
NFX_DEFINE_ERROR(NonFiniteLoss);

#undef NFX_DEFINE_ERROR

}  // namespace nfx
