"""gamescribe: box-score-to-text generation with explicit content selection.

A neural summary writer that decides token by token whether to realize a
data record, which entity and attribute to mention, and how to render
numbers, while a recurrent tracking state remembers what has been said.
Ships with its own reverse-mode autodiff, a deterministic supervision
aligner, greedy copy decoding, and the extractive evaluation suite
(relation generation, content selection, content ordering, BLEU).
"""

__version__ = "0.1.0"
