"""Character-level inflection lab.

Train seq2seq models (LSTM variants and a Transformer) on inflection
corpora and score their generalization against human wug-test judgments.
"""

__version__ = "0.1.0"
