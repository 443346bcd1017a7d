"""Answer-driven attention for a goal-oriented object-guessing dialogue game.

A questioner agent asks yes/no questions about a synthetic scene, an oracle
answers truthfully, and a guesser picks the hidden target object.  The
questioner maintains a per-object attention state that each answer sharpens,
inverts, or resets, and fuses difference/overall visual information weighted
by the current question-answer pair.
"""

__version__ = "0.1.0"
