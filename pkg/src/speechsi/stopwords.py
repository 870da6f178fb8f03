"""Fixed English stopword list used by the lexical analysis."""

import hashlib

STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because been before being
below between both but by can could did do does doing down during each few for from further
had has have having he her here hers herself him himself his how i if in into is it its itself
just me more most my myself no nor not now of off on once only or other our ours ourselves out
over own same she should so some such than that the their theirs them themselves then there
these they this those through to too under until up very was we were what when where which
while who whom why will with would you your yours yourself yourselves also um uh yeah oh like
""".split())


def stopwords_digest(words=STOPWORDS) -> str:
    """SHA-256 of the sorted, newline-joined list; identifies the list in reports."""
    return hashlib.sha256("\n".join(sorted(words)).encode()).hexdigest()
