"""Abstract text normalization: tokenize, drop stop words, Porter-stem."""

from __future__ import annotations

import re
from functools import lru_cache

from nltk.stem.porter import PorterStemmer

# Bundled list so normalization never depends on a downloaded corpus.
STOP_WORDS = frozenset(
    """
    a about above across after afterwards again against all almost alone along
    already also although always am among amongst an and another any anyhow
    anyone anything anyway anywhere are around as at be became because become
    becomes becoming been before beforehand behind being below beside besides
    between beyond both but by can cannot could did do does doing done down
    due during each eg either else elsewhere enough etc even ever every
    everyone everything everywhere except few for former formerly from further
    had has have having he hence her here hereafter hereby herein hereupon hers
    herself him himself his how however i ie if in indeed into is it its itself
    just last latter latterly least less many may me meanwhile might more
    moreover most mostly much must my myself namely neither never nevertheless
    next no nobody none noone nor not nothing now nowhere of off often on once
    one only onto or other others otherwise our ours ourselves out over own per
    perhaps rather re same seem seemed seeming seems several she should since
    so some somehow someone something sometime sometimes somewhere still such
    than that the their theirs them themselves then thence there thereafter
    thereby therefore therein thereupon these they this those though through
    throughout thru thus to together too toward towards under until up upon us
    very via was we well were what whatever when whence whenever where
    whereafter whereas whereby wherein whereupon wherever whether which while
    whither who whoever whole whom whose why will with within without would yet
    you your yours yourself yourselves
    """.split()
)

_TOKEN_RE = re.compile(r"[a-z][a-z0-9]*(?:'[a-z]+)?")
_stemmer = PorterStemmer()


@lru_cache(maxsize=65536)
def stem(word: str) -> str:
    return _stemmer.stem(word)


def normalize_text(text: str) -> list[str]:
    """Turn raw abstract text into the ordered list of normalized terms.

    Lower-cases, keeps alphanumeric tokens starting with a letter, removes
    stop words and single characters, then applies the Porter stemmer.
    The function is pure, so the same text always gives the same terms.

    >>> normalize_text("Quantum cosmology and the cosmological constant")
    ['quantum', 'cosmolog', 'cosmolog', 'constant']
    """
    out = []
    for tok in _TOKEN_RE.findall(text.lower()):
        tok = tok.split("'", 1)[0]
        if len(tok) < 2 or tok in STOP_WORDS:
            continue
        out.append(stem(tok))
    return out
