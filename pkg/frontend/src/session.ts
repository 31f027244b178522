import { ColorizeResponse } from './api.js';

export interface HistoryEntry {
    caption: string;
    image: string;
    heatmaps: Record<string, string> | null;
    timestamp: number;
}

export interface ColorizeFn {
    (imageB64: string, caption: string, returnHeatmaps?: boolean): Promise<ColorizeResponse>;
}

/** Replace every lexicon color word (whole word, case-insensitive) with the
 *  target, written in lowercase. Mirrors the server-side swap rule so chips
 *  behave exactly like the manipulation endpoint. */
export function swapColorWord(text: string, target: string, lexicon: string[]):
        { text: string; replaced: boolean } {
    if (lexicon.length === 0) return { text, replaced: false };
    const escaped = lexicon.map((w) => w.replace(/[.*+?^${}()|[\]\\]/g, '\\$&'));
    const pattern = new RegExp(`\\b(${escaped.join('|')})\\b`, 'gi');
    let replaced = false;
    const swapped = text.replace(pattern, () => {
        replaced = true;
        return target;
    });
    return { text: swapped, replaced };
}

/**
 * All studio state and the rules around it, kept free of DOM concerns:
 * history is append-only, at most one request is in flight, and a failed
 * request leaves the history untouched.
 */
export class Session {
    imageB64: string | null = null;
    imageName = '';
    history: HistoryEntry[] = [];
    inFlight = false;
    error: string | null = null;
    selectedBlock: number | null = null;
    compare: [number, number] | null = null;
    lexiconWords: string[] = [];

    private listeners: Array<() => void> = [];

    constructor(private colorizeFn: ColorizeFn, private now: () => number = Date.now) {}

    subscribe(listener: () => void): void {
        this.listeners.push(listener);
    }

    private notify(): void {
        for (const listener of this.listeners) listener();
    }

    setImage(imageB64: string, name = ''): void {
        this.imageB64 = imageB64;
        this.imageName = name;
        this.error = null;
        this.notify();
    }

    latest(): HistoryEntry | null {
        return this.history.length ? this.history[this.history.length - 1] : null;
    }

    previous(): HistoryEntry | null {
        return this.history.length > 1 ? this.history[this.history.length - 2] : null;
    }

    /** Colorize with the given caption; resolves true when a new history
     *  entry was appended. Ignored while another request is in flight. */
    async submitCaption(caption: string): Promise<boolean> {
        if (this.inFlight) return false;
        if (!this.imageB64) {
            this.error = 'upload an image first';
            this.notify();
            return false;
        }
        this.inFlight = true;
        this.error = null;
        this.notify();
        try {
            const result = await this.colorizeFn(this.imageB64, caption, true);
            this.history.push({
                caption,
                image: result.image,
                heatmaps: result.heatmaps,
                timestamp: this.now(),
            });
            if (this.selectedBlock !== null) {
                const heatmaps = result.heatmaps ?? {};
                if (!(String(this.selectedBlock) in heatmaps)) this.selectedBlock = null;
            }
            return true;
        } catch (err) {
            this.error = err instanceof Error ? err.message : String(err);
            return false;
        } finally {
            this.inFlight = false;
            this.notify();
        }
    }

    /** One-click chip: rewrite the current caption's color words to the
     *  target word and submit the result. */
    async swapChip(word: string, currentCaption: string): Promise<boolean> {
        const swapped = swapColorWord(currentCaption, word, this.lexiconWords);
        if (!swapped.replaced) {
            this.error = `caption has no color word to swap for "${word}"`;
            this.notify();
            return false;
        }
        return this.submitCaption(swapped.text);
    }

    /** Toggle the heatmap overlay for a block; no-op when the latest
     *  result was produced without that block's heatmap. */
    toggleHeatmap(block: number): void {
        const latest = this.latest();
        if (!latest || !latest.heatmaps || !(String(block) in latest.heatmaps)) return;
        this.selectedBlock = this.selectedBlock === block ? null : block;
        this.notify();
    }

    heatmapAvailable(block: number): boolean {
        const latest = this.latest();
        return !!latest?.heatmaps && String(block) in latest.heatmaps;
    }

    /** Select two history entries for the side-by-side view; out-of-range
     *  indices are a no-op. */
    compareHistory(i: number, j: number): void {
        const valid = (k: number) => Number.isInteger(k) && k >= 0 && k < this.history.length;
        if (!valid(i) || !valid(j)) return;
        this.compare = [i, j];
        this.notify();
    }

    clearCompare(): void {
        this.compare = null;
        this.notify();
    }
}
