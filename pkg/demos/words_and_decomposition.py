"""Apply g-words to polynomials and print their integer canonical forms."""

from paraprod import TruncatedSeries, Word, apply_word, canonical_decomposition_H0

g = TruncatedSeries([0.5, 1.0, 0.25j])
f = TruncatedSeries([0.0, 1.0, -2.0])

for letters in ["T", "ST", "TS", "MST", "TTS"]:
    h = apply_word(letters, g, f)
    print(f"{letters:>4}: degree {h.degree}, first coefficients {h.coeffs[:4].round(4)}")

print()
for letters in ["TS", "MT", "TSM", "MTST"]:
    form = canonical_decomposition_H0(Word(letters))
    print(f"{letters:>5} -> k={form.k} n0={form.n0} c={form.c}")
