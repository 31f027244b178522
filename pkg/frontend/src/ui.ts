import { ApiClient } from './api.js';
import { highlightColorDiff } from './diff.js';
import { Session } from './session.js';

const HEATMAP_BLOCKS = [6, 7, 8];

function el<K extends keyof HTMLElementTagNameMap>(
    tag: K, className = '', text = ''): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (className) node.className = className;
    if (text) node.textContent = text;
    return node;
}

function pngSrc(b64: string): string {
    return `data:image/png;base64,${b64}`;
}

export class StudioApp {
    private session: Session;
    private api: ApiClient;

    private captionBox!: HTMLTextAreaElement;
    private submitBtn!: HTMLButtonElement;
    private chipRow!: HTMLDivElement;
    private errorBanner!: HTMLDivElement;
    private resultsPane!: HTMLElement;
    private historyPane!: HTMLElement;
    private comparePane!: HTMLElement;
    private heatmapRow!: HTMLDivElement;
    private modelBadge!: HTMLSpanElement;
    private uploadPreview!: HTMLImageElement;

    private compareA: number | null = null;
    private compareB: number | null = null;

    constructor(private root: HTMLElement, baseUrl = '') {
        this.api = new ApiClient(baseUrl);
        this.session = new Session((img, caption, heat) =>
            this.api.colorize(img, caption, heat));
        this.session.subscribe(() => this.render());
    }

    async init(): Promise<void> {
        this.buildSkeleton();
        await this.connect();
        this.render();
    }

    private async connect(): Promise<void> {
        try {
            const health = await this.api.health();
            this.modelBadge.textContent =
                `${health.model_id} (${health.fusion_mode})`;
            const lexicon = await this.api.lexicon();
            this.session.lexiconWords = lexicon.words;
            this.renderChips();
        } catch (err) {
            this.modelBadge.textContent = 'service unreachable';
            this.session.error = err instanceof Error ? err.message : String(err);
        }
    }

    private buildSkeleton(): void {
        this.root.innerHTML = '';
        const header = el('header');
        header.append(el('h1', '', 'lang2color studio'));
        this.modelBadge = el('span', 'badge', 'connecting...');
        header.append(this.modelBadge);

        const urlBox = el('input') as HTMLInputElement;
        urlBox.placeholder = 'server URL (default: same origin)';
        urlBox.addEventListener('change', () => {
            this.api.setBaseUrl(urlBox.value.trim());
            void this.connect();
        });
        header.append(urlBox);
        this.root.append(header);

        const controls = el('section', 'controls');
        const fileInput = el('input') as HTMLInputElement;
        fileInput.type = 'file';
        fileInput.accept = 'image/png,image/jpeg';
        fileInput.addEventListener('change', () => this.onUpload(fileInput));
        controls.append(fileInput);

        this.uploadPreview = el('img', 'upload-preview');
        controls.append(this.uploadPreview);

        this.captionBox = el('textarea') as HTMLTextAreaElement;
        this.captionBox.placeholder = 'describe the image, e.g. "a red circle on a grey background"';
        this.captionBox.rows = 2;
        controls.append(this.captionBox);

        this.submitBtn = el('button', 'primary', 'colorize') as HTMLButtonElement;
        this.submitBtn.addEventListener('click', () => {
            void this.session.submitCaption(this.captionBox.value);
        });
        controls.append(this.submitBtn);

        this.chipRow = el('div', 'chips');
        controls.append(this.chipRow);

        this.errorBanner = el('div', 'error hidden');
        controls.append(this.errorBanner);
        this.root.append(controls);

        this.heatmapRow = el('div', 'heatmap-row');
        this.root.append(this.heatmapRow);
        this.resultsPane = el('section', 'results');
        this.root.append(this.resultsPane);
        this.historyPane = el('section', 'history');
        this.root.append(this.historyPane);
        this.comparePane = el('section', 'compare');
        this.root.append(this.comparePane);
    }

    private onUpload(input: HTMLInputElement): void {
        const file = input.files?.[0];
        if (!file) return;
        const reader = new FileReader();
        reader.onload = () => {
            const dataUrl = reader.result as string;
            const b64 = dataUrl.split(',')[1] ?? '';
            this.session.setImage(b64, file.name);
            this.uploadPreview.src = dataUrl;
        };
        reader.readAsDataURL(file);
    }

    private renderChips(): void {
        this.chipRow.innerHTML = '';
        for (const word of this.session.lexiconWords) {
            const chip = el('button', `chip chip-${word}`, word);
            chip.addEventListener('click', () => {
                void this.session.swapChip(word, this.captionBox.value).then((ok) => {
                    if (ok) {
                        const latest = this.session.latest();
                        if (latest) this.captionBox.value = latest.caption;
                    }
                });
            });
            this.chipRow.append(chip);
        }
    }

    private render(): void {
        const busy = this.session.inFlight;
        this.submitBtn.disabled = busy || !this.session.imageB64;
        this.captionBox.disabled = busy;
        for (const chip of Array.from(this.chipRow.children)) {
            (chip as HTMLButtonElement).disabled = busy;
        }

        this.errorBanner.classList.toggle('hidden', !this.session.error);
        this.errorBanner.textContent = this.session.error ?? '';

        this.renderHeatmapControls();
        this.renderResults();
        this.renderHistory();
        this.renderCompare();
    }

    private renderHeatmapControls(): void {
        this.heatmapRow.innerHTML = '';
        if (!this.session.latest()) return;
        this.heatmapRow.append(el('span', 'label', 'activation overlay:'));
        for (const block of HEATMAP_BLOCKS) {
            const btn = el('button', 'toggle', `block ${block}`) as HTMLButtonElement;
            btn.disabled = !this.session.heatmapAvailable(block);
            btn.classList.toggle('active', this.session.selectedBlock === block);
            btn.addEventListener('click', () => this.session.toggleHeatmap(block));
            this.heatmapRow.append(btn);
        }
    }

    private resultPanel(caption: string, image: string,
                        heatmap: string | null, title: string): HTMLElement {
        const panel = el('figure', 'panel');
        panel.append(el('figcaption', 'panel-title', title));
        const frame = el('div', 'frame');
        const img = el('img') as HTMLImageElement;
        img.src = pngSrc(image);
        frame.append(img);
        if (heatmap) {
            const overlay = el('img', 'overlay') as HTMLImageElement;
            overlay.src = pngSrc(heatmap);
            frame.append(overlay);
        }
        panel.append(frame);
        panel.append(el('figcaption', 'caption-text', caption));
        return panel;
    }

    private renderResults(): void {
        this.resultsPane.innerHTML = '';
        const latest = this.session.latest();
        if (!latest) return;
        const block = this.session.selectedBlock;
        const heat = block !== null ? latest.heatmaps?.[String(block)] ?? null : null;
        this.resultsPane.append(this.resultPanel(latest.caption, latest.image, heat, 'latest'));
        const previous = this.session.previous();
        if (previous) {
            this.resultsPane.append(
                this.resultPanel(previous.caption, previous.image, null, 'previous'));
        }
    }

    private renderHistory(): void {
        this.historyPane.innerHTML = '';
        if (!this.session.history.length) return;
        this.historyPane.append(el('h2', '', 'history'));
        const list = el('ol');
        this.session.history.forEach((entry, index) => {
            const item = el('li');
            const thumb = el('img', 'thumb') as HTMLImageElement;
            thumb.src = pngSrc(entry.image);
            item.append(thumb);
            item.append(el('span', 'history-caption', entry.caption));
            const pickA = el('button', 'toggle', 'A') as HTMLButtonElement;
            pickA.classList.toggle('active', this.compareA === index);
            pickA.addEventListener('click', () => {
                this.compareA = index;
                this.maybeCompare();
            });
            const pickB = el('button', 'toggle', 'B') as HTMLButtonElement;
            pickB.classList.toggle('active', this.compareB === index);
            pickB.addEventListener('click', () => {
                this.compareB = index;
                this.maybeCompare();
            });
            item.append(pickA, pickB);
            list.append(item);
        });
        this.historyPane.append(list);
    }

    private maybeCompare(): void {
        if (this.compareA !== null && this.compareB !== null) {
            this.session.compareHistory(this.compareA, this.compareB);
        } else {
            this.render();
        }
    }

    private captionWithHighlights(tokens: { text: string; highlight: boolean }[]): HTMLElement {
        const holder = el('p', 'caption-text');
        tokens.forEach((token, i) => {
            const span = el('span', token.highlight ? 'diff' : '', token.text);
            holder.append(span);
            if (i < tokens.length - 1) holder.append(document.createTextNode(' '));
        });
        return holder;
    }

    private renderCompare(): void {
        this.comparePane.innerHTML = '';
        const pair = this.session.compare;
        if (!pair) return;
        const [i, j] = pair;
        const a = this.session.history[i];
        const b = this.session.history[j];
        this.comparePane.append(el('h2', '', 'compare'));
        if (i === j) {
            this.comparePane.append(this.resultPanel(a.caption, a.image, null, `run ${i + 1}`));
            return;
        }
        const diff = highlightColorDiff(a.caption, b.caption, this.session.lexiconWords);
        for (const [entry, tokens, index] of [
            [a, diff.a, i], [b, diff.b, j],
        ] as const) {
            const panel = el('figure', 'panel');
            panel.append(el('figcaption', 'panel-title', `run ${index + 1}`));
            const frame = el('div', 'frame');
            const img = el('img') as HTMLImageElement;
            img.src = pngSrc(entry.image);
            frame.append(img);
            panel.append(frame);
            panel.append(this.captionWithHighlights([...tokens]));
            this.comparePane.append(panel);
        }
    }
}
