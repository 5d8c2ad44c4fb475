/* Copyright 2026 The TriLiteNet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "tln/evaluate.hpp"

namespace tln {

std::vector<uint8_t> argmax_labels(const Tensor<float>& logits, int64_t n) {
  if (logits.rank() != 4 || logits.dim(1) != 2 || n < 0 || n >= logits.dim(0))
    throw ParameterError("argmax_labels: expected (N,2,H,W) logits");
  const int64_t plane = logits.dim(2) * logits.dim(3);
  const float* bg = logits.data() + n * 2 * plane;
  const float* fg = bg + plane;
  std::vector<uint8_t> out(static_cast<size_t>(plane));
  for (int64_t q = 0; q < plane; ++q) out[static_cast<size_t>(q)] = fg[q] > bg[q] ? 1 : 0;
  return out;
}

EvalRun evaluate(const Model& model, const std::vector<Sample>& samples, const EvalOptions& options) {
  EvalRun run;
  std::vector<std::vector<GtBox>> gts;
  for (const Sample& s : samples) {
    const Batch b = make_batch({&s}, options.lane_width);
    Ctx ctx(model.params, model.buffers);
    if (options.configure) options.configure(ctx);
    const Tensor<float> image = options.input_transform ? options.input_transform(b.images) : b.images;
    const ModelOutput out = forward(model, ctx, constant(image));
    run.da += confusion(out.da.value(), b.drivable);
    run.ll += confusion(out.ll.value(), b.lanes);
    const std::array<Tensor<float>, 3> raw{out.det[0].value(), out.det[1].value(), out.det[2].value()};
    run.detections.push_back(nms(decode(raw, 0, model.anchors, options.conf_threshold), options.nms_iou));
    gts.push_back(b.gt[0]);
    if (options.keep_labels) {
      run.da_labels.push_back(argmax_labels(out.da.value(), 0));
      run.ll_labels.push_back(argmax_labels(out.ll.value(), 0));
    }
  }
  const DetectionScore d = eval_detection(run.detections, gts);
  run.report.recall = d.recall;
  run.report.map50 = d.map50;
  run.report.da_miou = run.da.mean_iou();
  run.report.ll_acc = run.ll.balanced_accuracy();
  run.report.ll_iou = run.ll.foreground_iou();
  return run;
}

}  // namespace tln
