"""Convert the Keras ImageNet VGG16 (include_top=False) weights to the
safetensors layout read by `Backbone::load`.

    pip install tensorflow safetensors numpy
    python scripts/convert_vgg16_weights.py vgg16_notop.safetensors
"""

import sys

import numpy as np
from safetensors.numpy import save_file
from tensorflow.keras.applications import VGG16


def main(out: str) -> None:
    model = VGG16(weights="imagenet", include_top=False)
    tensors = {}
    for layer in model.layers:
        if not layer.name.startswith("block") or "conv" not in layer.name:
            continue
        kernel, bias = layer.get_weights()
        # Keras stores (kh, kw, in, out); the backbone expects (out, in, kh, kw)
        tensors[f"{layer.name}.weight"] = np.ascontiguousarray(kernel.transpose(3, 2, 0, 1), dtype=np.float32)
        tensors[f"{layer.name}.bias"] = bias.astype(np.float32)
    assert len(tensors) == 26, f"expected 13 conv layers, found {len(tensors) // 2}"
    save_file(tensors, out)
    print(f"wrote {len(tensors)} tensors to {out}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "vgg16_notop.safetensors")
