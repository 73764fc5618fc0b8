"""Builds tiny.onnx: mean of the whole [1, T, 3, S, S] input, times W plus B.

Run from this directory: python3 make_onnx_fixture.py
"""
import onnx
from onnx import TensorProto, helper

T, S = 25, 16
W, B = 8.0, -2.0

inp = helper.make_tensor_value_info("input", TensorProto.FLOAT, [1, T, 3, S, S])
out = helper.make_tensor_value_info("score", TensorProto.FLOAT, [1])
nodes = [
    helper.make_node("ReduceMean", ["input"], ["m"], axes=[1, 2, 3, 4], keepdims=0),
    helper.make_node("Mul", ["m", "w"], ["mw"]),
    helper.make_node("Add", ["mw", "b"], ["score"]),
]
inits = [
    helper.make_tensor("w", TensorProto.FLOAT, [1], [W]),
    helper.make_tensor("b", TensorProto.FLOAT, [1], [B]),
]
graph = helper.make_graph(nodes, "tiny", [inp], [out], inits)
model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", 13)])
model.ir_version = 7
onnx.checker.check_model(model)
onnx.save(model, "onnx/tiny.onnx")
with open("onnx/model.meta", "w") as f:
    f.write(f"input_size={S}\nframes={T}\nemits=logit\n")
