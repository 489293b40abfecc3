#pragma once

#include <cstddef>
#include <vector>

#include "terla/netsim/types.hpp"

namespace terla::netsim {

// The segment's native action space: Sleep, Monitor, then
// {Analyse, Remove, Restore, DeployDecoy} for every host slot, slot-major.
// Dead slots stay in the space; choosing one yields an invalid action.
std::size_t flat_action_count(const SegmentLayout& layout);
EnvAction decode_flat_action(std::size_t index, const SegmentLayout& layout);
std::size_t encode_flat_action(const EnvAction& action, const SegmentLayout& layout);

// One-hot phase, subnet vector, process flags, network flags.
std::size_t flat_observation_width(const SegmentLayout& layout);
std::vector<float> flat_observation(const SegmentObservation& obs);

}  // namespace terla::netsim
