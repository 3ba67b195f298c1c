#include "helpers.hpp"

#include "rlab/capacity.hpp"
#include "rlab/dataio.hpp"

namespace testutil {

const rlab::MlpModel& digit_model() {
  static const rlab::MlpModel model = [] {
    const std::size_t hidden[] = {64};
    const rlab::Dataset data = rlab::synth_digits(300, 11);
    rlab::TrainConfig tc;
    tc.max_epochs = 15;
    tc.seed = 5;
    return rlab::train(rlab::mlp_init(rlab::mlp_layers(784, hidden, 10), 3), data, tc).model;
  }();
  return model;
}

}  // namespace testutil
