export interface Token {
    text: string;
    highlight: boolean;
}

/**
 * Tokenize two captions and mark where they differ on a color word, for
 * the compare view. Tokens are aligned by position; a position is
 * highlighted in both captions when the words differ and at least one of
 * them is a lexicon color word.
 */
export function highlightColorDiff(a: string, b: string, lexicon: string[]):
        { a: Token[]; b: Token[] } {
    const words = new Set(lexicon.map((w) => w.toLowerCase()));
    const tokensA = a.split(/\s+/).filter((t) => t.length > 0);
    const tokensB = b.split(/\s+/).filter((t) => t.length > 0);
    const isColor = (token: string) => words.has(token.toLowerCase().replace(/[^a-z0-9]/g, ''));

    const markA: boolean[] = tokensA.map(() => false);
    const markB: boolean[] = tokensB.map(() => false);
    const n = Math.max(tokensA.length, tokensB.length);
    for (let i = 0; i < n; i++) {
        const ta = tokensA[i];
        const tb = tokensB[i];
        const differ = (ta ?? '') .toLowerCase() !== (tb ?? '').toLowerCase();
        if (differ && ((ta && isColor(ta)) || (tb && isColor(tb)))) {
            if (ta) markA[i] = true;
            if (tb) markB[i] = true;
        }
    }
    return {
        a: tokensA.map((text, i) => ({ text, highlight: markA[i] })),
        b: tokensB.map((text, i) => ({ text, highlight: markB[i] })),
    };
}
