"""vidextract: pretrained-encoder embeddings for video clips.

Decodes manifest clips, runs a frozen visual encoder (an image encoder
averaged over sampled frames, or a video encoder on its native clip
input), and writes the results as a VAEB embedding store consumed by the
vidprobe toolkit.
"""

__version__ = "0.1.0"
