"""Lower checkpoint weights into ONNX encoder graphs.

The graphs use a deliberately small operator vocabulary (elementwise
arithmetic, MatMul, Softmax, ReduceMean, Reshape/Transpose/Slice/Concat,
Gather, ArgMax/Equal/Cast) so any opset-13 runtime, including the
inference package's numpy executor, runs them. Layer norm is emitted as
its mean/variance decomposition, the patch convolution as a
reshape-transpose-matmul, and end-of-text pooling as an
argmax-equality-matmul chain. All shapes except the batch dimension are
baked in at export time.
"""

from __future__ import annotations

import numpy as np

from . import protowrite as pw
from .arch import TowerConfig

LN_EPS = 1e-5


class GraphBuilder:
    def __init__(self):
        self.nodes: list[bytes] = []
        self.inits: list[bytes] = []
        self._n = 0

    def fresh(self, hint: str) -> str:
        self._n += 1
        return f"{hint}_{self._n}"

    def init(self, name: str, array: np.ndarray) -> str:
        self.inits.append(pw.tensor(name, np.ascontiguousarray(array)))
        return name

    def scalar(self, hint: str, value: float) -> str:
        return self.init(self.fresh(hint), np.float32(value))

    def ints(self, hint: str, values) -> str:
        return self.init(self.fresh(hint), np.asarray(values, dtype=np.int64))

    def emit(self, op: str, inputs: list[str], attrs: dict | None = None,
             out: str | None = None) -> str:
        out = out or self.fresh(op.lower())
        self.nodes.append(pw.node(op, inputs, [out], attrs))
        return out

    def linear(self, x: str, weight: np.ndarray, bias: np.ndarray, tag: str) -> str:
        w = self.init(self.fresh(f"{tag}_w"), weight.T.astype(np.float32))
        b = self.init(self.fresh(f"{tag}_b"), bias.astype(np.float32))
        return self.emit("Add", [self.emit("MatMul", [x, w]), b])

    def layer_norm(self, x: str, weight: np.ndarray, bias: np.ndarray,
                   axis: int, tag: str) -> str:
        mu = self.emit("ReduceMean", [x], {"axes": [axis], "keepdims": 1})
        d = self.emit("Sub", [x, mu])
        var = self.emit("ReduceMean", [self.emit("Mul", [d, d])],
                        {"axes": [axis], "keepdims": 1})
        sd = self.emit("Sqrt", [self.emit("Add", [var, self.scalar("eps", LN_EPS)])])
        xh = self.emit("Div", [d, sd])
        w = self.init(self.fresh(f"{tag}_ln_w"), weight.astype(np.float32))
        b = self.init(self.fresh(f"{tag}_ln_b"), bias.astype(np.float32))
        return self.emit("Add", [self.emit("Mul", [xh, w]), b])

    def quick_gelu(self, x: str) -> str:
        gate = self.emit("Sigmoid", [self.emit("Mul", [x, self.scalar("c", 1.702)])])
        return self.emit("Mul", [x, gate])

    def attention(self, x: str, sd: dict, prefix: str, seq: int, width: int,
                  heads: int, mask: np.ndarray | None, tag: str) -> str:
        dh = width // heads
        in_w = np.asarray(sd[f"{prefix}attn.in_proj_weight"], dtype=np.float32)
        in_b = np.asarray(sd[f"{prefix}attn.in_proj_bias"], dtype=np.float32)
        heads_shape = self.ints("shape", [0, seq, heads, dh])
        parts = []
        for j, name in enumerate(("q", "k", "v")):
            proj = self.linear(
                x, in_w[j * width : (j + 1) * width], in_b[j * width : (j + 1) * width],
                f"{tag}_{name}",
            )
            parts.append(self.emit("Reshape", [proj, heads_shape]))
        q = self.emit("Transpose", [parts[0]], {"perm": [0, 2, 1, 3]})
        k = self.emit("Transpose", [parts[1]], {"perm": [0, 2, 3, 1]})
        v = self.emit("Transpose", [parts[2]], {"perm": [0, 2, 1, 3]})
        scores = self.emit(
            "Mul", [self.emit("MatMul", [q, k]), self.scalar("scale", dh ** -0.5)]
        )
        if mask is not None:
            scores = self.emit(
                "Add", [scores, self.init(self.fresh(f"{tag}_mask"), mask)]
            )
        probs = self.emit("Softmax", [scores], {"axis": 3})
        ctx = self.emit("MatMul", [probs, v])
        ctx = self.emit("Transpose", [ctx], {"perm": [0, 2, 1, 3]})
        ctx = self.emit("Reshape", [ctx, self.ints("shape", [0, seq, width])])
        return self.linear(
            ctx,
            np.asarray(sd[f"{prefix}attn.out_proj.weight"], dtype=np.float32),
            np.asarray(sd[f"{prefix}attn.out_proj.bias"], dtype=np.float32),
            f"{tag}_out",
        )

    def residual_block(self, x: str, sd: dict, prefix: str, seq: int, width: int,
                       heads: int, mask: np.ndarray | None, tag: str) -> str:
        y = self.layer_norm(
            x, np.asarray(sd[f"{prefix}ln_1.weight"]), np.asarray(sd[f"{prefix}ln_1.bias"]),
            2, f"{tag}_ln1",
        )
        x = self.emit("Add", [x, self.attention(y, sd, prefix, seq, width, heads, mask, tag)])
        y2 = self.layer_norm(
            x, np.asarray(sd[f"{prefix}ln_2.weight"]), np.asarray(sd[f"{prefix}ln_2.bias"]),
            2, f"{tag}_ln2",
        )
        h = self.linear(
            y2, np.asarray(sd[f"{prefix}mlp.c_fc.weight"], dtype=np.float32),
            np.asarray(sd[f"{prefix}mlp.c_fc.bias"], dtype=np.float32), f"{tag}_fc",
        )
        m = self.linear(
            self.quick_gelu(h),
            np.asarray(sd[f"{prefix}mlp.c_proj.weight"], dtype=np.float32),
            np.asarray(sd[f"{prefix}mlp.c_proj.bias"], dtype=np.float32), f"{tag}_proj",
        )
        return self.emit("Add", [x, m])


def build_text_tower(cfg: TowerConfig, sd: dict) -> bytes:
    g = GraphBuilder()
    seq, width = cfg.context_length, cfg.text_width
    tok_emb = g.init("token_embedding", np.asarray(sd["token_embedding.weight"], dtype=np.float32))
    pos_emb = g.init("positional_embedding", np.asarray(sd["positional_embedding"], dtype=np.float32))
    x = g.emit("Gather", [tok_emb, "tokens"], {"axis": 0})
    x = g.emit("Add", [x, pos_emb])

    mask = np.triu(np.full((seq, seq), -np.inf, dtype=np.float32), k=1)
    for i in range(cfg.text_layers):
        x = g.residual_block(
            x, sd, f"transformer.resblocks.{i}.", seq, width, cfg.text_heads,
            mask, f"t{i}",
        )
    x = g.layer_norm(
        x, np.asarray(sd["ln_final.weight"]), np.asarray(sd["ln_final.bias"]), 2, "tf"
    )

    eot = g.emit("ArgMax", ["tokens"], {"axis": 1, "keepdims": 1})
    positions = g.init("positions", np.arange(seq, dtype=np.int64))
    hit = g.emit("Equal", [positions, eot])
    pick = g.emit("Cast", [hit], {"to": pw.FLOAT})
    pick = g.emit("Reshape", [pick, g.ints("shape", [0, 1, seq])])
    pooled = g.emit("Reshape", [g.emit("MatMul", [pick, x]), g.ints("shape", [0, width])])
    proj = g.init("text_projection", np.asarray(sd["text_projection"], dtype=np.float32))
    g.emit("MatMul", [pooled, proj], out="text_embedding")

    return pw.model(
        "text_tower", g.nodes, g.inits,
        inputs=[pw.value_info("tokens", pw.INT64, ("batch", seq))],
        outputs=[pw.value_info("text_embedding", pw.FLOAT, ("batch", cfg.embed_dim))],
    )


def build_image_tower(cfg: TowerConfig, sd: dict) -> bytes:
    g = GraphBuilder()
    grid, patch, width = cfg.grid, cfg.patch_size, cfg.image_width
    seq = cfg.image_positions

    p = g.emit("Reshape", ["image", g.ints("shape", [0, 3, grid, patch, grid, patch])])
    p = g.emit("Transpose", [p], {"perm": [0, 2, 4, 1, 3, 5]})
    p = g.emit("Reshape", [p, g.ints("shape", [0, grid * grid, 3 * patch * patch])])
    conv_w = np.asarray(sd["visual.conv1.weight"], dtype=np.float32)
    conv_flat = g.init("patch_projection", conv_w.reshape(width, -1).T.copy())
    patches = g.emit("MatMul", [p, conv_flat])

    head = g.emit(
        "Slice",
        [patches, g.ints("starts", [0]), g.ints("ends", [1]), g.ints("axes", [1])],
    )
    zeros = g.emit("Mul", [head, g.scalar("zero", 0.0)])
    cls_tok = g.init("class_embedding", np.asarray(sd["visual.class_embedding"], dtype=np.float32))
    cls = g.emit("Add", [zeros, cls_tok])
    x = g.emit("Concat", [cls, patches], {"axis": 1})
    pos = g.init("positional_embedding", np.asarray(sd["visual.positional_embedding"], dtype=np.float32))
    x = g.emit("Add", [x, pos])
    x = g.layer_norm(
        x, np.asarray(sd["visual.ln_pre.weight"]), np.asarray(sd["visual.ln_pre.bias"]),
        2, "vpre",
    )

    for i in range(cfg.image_layers):
        x = g.residual_block(
            x, sd, f"visual.transformer.resblocks.{i}.", seq, width,
            cfg.image_heads, None, f"v{i}",
        )

    first = g.emit(
        "Slice",
        [x, g.ints("starts", [0]), g.ints("ends", [1]), g.ints("axes", [1])],
    )
    first = g.emit("Reshape", [first, g.ints("shape", [0, width])])
    y = g.layer_norm(
        first, np.asarray(sd["visual.ln_post.weight"]), np.asarray(sd["visual.ln_post.bias"]),
        1, "vpost",
    )
    proj = g.init("visual_projection", np.asarray(sd["visual.proj"], dtype=np.float32))
    g.emit("MatMul", [y, proj], out="image_embedding")

    return pw.model(
        "image_tower", g.nodes, g.inits,
        inputs=[pw.value_info("image", pw.FLOAT, ("batch", 3, 224, 224))],
        outputs=[pw.value_info("image_embedding", pw.FLOAT, ("batch", cfg.embed_dim))],
    )
