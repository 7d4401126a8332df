"""Zero-shot classification mechanics on synthetic embeddings.

Demonstrates the three aggregation steps (frame mean, per-class text mean,
cosine argmax) and the two interchangeable encoder backends: a small ONNX
tower pair executed by the built-in runtime, and a file backend replaying
the exact vectors the towers produced.
"""

import tempfile
from pathlib import Path

import numpy as np

from zsar.backend import EncoderSpec, FileBackend, OnnxBackend, frame_key
from zsar.classifier import ClassEmbedding, predict, video_embedding
from zsar.labels import ActionClass
from zsar.onnx_proto import FLOAT, INT64, Graph, Model, Node, TensorInfo, save_model
from zsar.preprocess import preprocess_image
from zsar.tokenizer import BpeTokenizer
from zsar.vectable import write_table

DIM = 8
CTX = 16

print("== the math on paper-simple vectors ==")
frames = np.array([[1.0, 0.0], [0.0, 1.0]])
print("V̄ = mean of frame embeddings:", video_embedding(frames))
classes = [
    ClassEmbedding(ActionClass.from_raw("Snowboarding"), np.array([1.0, 0.0]), M=1, index=0),
    ClassEmbedding(ActionClass.from_raw("Surfing"), np.array([0.0, 1.0]), M=1, index=1),
]
pred = predict(np.array([0.9, 0.1]), classes)
for action, score in pred.ranking:
    print(f"  cos({action.display}) = {score:.4f}")
print("predicted:", pred.predicted.display)

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    rng = np.random.default_rng(0)

    # a toy text tower: token embedding -> mean pool -> projection
    merges = tmp / "merges.txt"
    merges.write_text("#version: demo\nt h\nth e</w>\n")
    tok = BpeTokenizer(merges, context_length=CTX)
    text_graph = Graph(
        name="text_tower",
        inputs=[TensorInfo("tokens", INT64, ("batch", CTX))],
        outputs=[TensorInfo("text_embedding", FLOAT, ("batch", DIM))],
        initializers={
            "emb": rng.standard_normal((tok.vocab_size, 12)).astype(np.float32),
            "proj": rng.standard_normal((12, DIM)).astype(np.float32),
        },
        nodes=[
            Node("Gather", ["emb", "tokens"], ["e"], {"axis": 0}),
            Node("ReduceMean", ["e"], ["pooled"], {"axes": [1], "keepdims": 0}),
            Node("MatMul", ["pooled", "proj"], ["text_embedding"]),
        ],
    )
    image_graph = Graph(
        name="image_tower",
        inputs=[TensorInfo("image", FLOAT, ("batch", 3, 224, 224))],
        outputs=[TensorInfo("image_embedding", FLOAT, ("batch", DIM))],
        initializers={
            "w": rng.standard_normal((3, DIM)).astype(np.float32),
            "b": rng.standard_normal(DIM).astype(np.float32),
        },
        nodes=[
            Node("ReduceMean", ["image"], ["pooled"], {"axes": [2, 3], "keepdims": 0}),
            Node("MatMul", ["pooled", "w"], ["p"]),
            Node("Add", ["p", "b"], ["image_embedding"]),
        ],
    )
    save_model(Model(graph=text_graph), tmp / "text.onnx")
    save_model(Model(graph=image_graph), tmp / "image.onnx")

    onnx_backend = OnnxBackend(
        EncoderSpec(
            backend="onnx", embed_dim=DIM,
            text_model_path=str(tmp / "text.onnx"),
            image_model_path=str(tmp / "image.onnx"),
            tokenizer_path=str(merges), context_length=CTX,
        )
    )

    print("\n== classify three synthetic frames against two classes (onnx backend) ==")
    class_texts = {"Snowboarding": ["the snow"], "Surfing": ["the sea"]}
    video = np.stack([
        preprocess_image(np.full((64, 64, 3), v, np.uint8)) for v in (40, 90, 200)
    ])

    def classify(backend):
        embs = [
            ClassEmbedding.from_texts(ActionClass.from_raw(raw), backend.encode_texts(ts), i)
            for i, (raw, ts) in enumerate(class_texts.items())
        ]
        return predict(video_embedding(backend.encode_frames(video)), embs)

    pred = classify(onnx_backend)
    for action, score in pred.ranking:
        print(f"  cos({action.display}) = {score:+.6f}")

    print("\n== dump the towers' outputs and replay through the file backend ==")
    table = {}
    for texts in class_texts.values():
        for text, row in zip(texts, onnx_backend.encode_texts(texts)):
            table[text.encode()] = row
    for frame, row in zip(video, onnx_backend.encode_frames(video)):
        table[frame_key(frame)] = row
    write_table(tmp / "table.embt", table, DIM)
    file_backend = FileBackend(
        EncoderSpec(backend="file", embed_dim=DIM,
                    embedding_table_path=str(tmp / "table.embt"))
    )
    replay = classify(file_backend)
    same = [s for _, s in pred.ranking] == [s for _, s in replay.ranking]
    print(f"  file backend reproduces the onnx scores bitwise: {same}")
