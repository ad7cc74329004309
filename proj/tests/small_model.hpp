#pragma once

// An 8x8, M=32 model trained for a few seconds on synthetic indoor data,
// shared by tests that need a victim which has actually learned something.

#include "csiadv/channel/dataset.hpp"
#include "csiadv/net/train.hpp"

struct SmallSetup {
  csiadv::channel::Dataset train;
  csiadv::channel::Dataset held_out;
  csiadv::net::CsiNetParams<float> model;
};

inline const SmallSetup& small_setup() {
  static const SmallSetup setup = [] {
    namespace ch = csiadv::channel;
    ch::ScenarioConfig scn;
    scn.nc = 8;
    scn.nt = 8;
    const auto chans = ch::synth_truncated(scn, 0, 1500);
    const auto norm = ch::fit_normalization(chans);
    SmallSetup s;
    s.train = ch::apply_normalization(scn, std::span(chans).subspan(0, 1000), norm);
    s.held_out = ch::apply_normalization(scn, std::span(chans).subspan(1000), norm);
    csiadv::net::TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 50;
    tc.seed = 3;
    s.model = csiadv::net::train(s.train, csiadv::net::ModelConfig{8, 8, 32}, tc).model;
    s.model.freeze();
    return s;
  }();
  return setup;
}
