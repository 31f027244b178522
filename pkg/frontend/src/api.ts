export interface ColorizeResponse {
    image: string;
    heatmaps: Record<string, string> | null;
    timing_ms: number;
}

export interface ManipulateVariant {
    word: string;
    caption: string;
    image: string;
    region_mean_ab?: [number, number];
}

export interface HealthResponse {
    status: string;
    model_id: string;
    fusion_mode: string;
}

export interface LexiconResponse {
    words: string[];
    canonical_ab: Record<string, [number, number]>;
}

export class ApiError extends Error {
    constructor(public status: number, message: string) {
        super(message);
    }
}

async function parseError(response: Response): Promise<string> {
    try {
        const body = await response.json();
        if (typeof body.error === 'string') return body.error;
        if (Array.isArray(body.errors)) {
            return body.errors.map((e: { field: string; message: string }) =>
                `${e.field}: ${e.message}`).join('; ');
        }
    } catch {
        // fall through to the generic message
    }
    return `request failed with status ${response.status}`;
}

export class ApiClient {
    constructor(
        private baseUrl: string = '',
        private fetchFn: typeof fetch = (...args) => fetch(...args),
    ) {}

    setBaseUrl(url: string): void {
        this.baseUrl = url.replace(/\/$/, '');
    }

    private async request<T>(path: string, init?: RequestInit): Promise<T> {
        const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
        if (!response.ok) {
            throw new ApiError(response.status, await parseError(response));
        }
        return response.json() as Promise<T>;
    }

    health(): Promise<HealthResponse> {
        return this.request<HealthResponse>('/health');
    }

    lexicon(): Promise<LexiconResponse> {
        return this.request<LexiconResponse>('/lexicon');
    }

    colorize(imageB64: string, caption: string, returnHeatmaps = true,
             blocks: number[] = [6, 7, 8]): Promise<ColorizeResponse> {
        return this.request<ColorizeResponse>('/colorize', {
            method: 'POST',
            headers: { 'content-type': 'application/json' },
            body: JSON.stringify({
                image: imageB64,
                caption,
                return_heatmaps: returnHeatmaps,
                blocks,
            }),
        });
    }

    manipulate(imageB64: string, baseCaption: string, words: string[],
               maskB64?: string): Promise<{ variants: ManipulateVariant[] }> {
        return this.request<{ variants: ManipulateVariant[] }>('/manipulate', {
            method: 'POST',
            headers: { 'content-type': 'application/json' },
            body: JSON.stringify({
                image: imageB64,
                base_caption: baseCaption,
                words,
                mask: maskB64 ?? null,
            }),
        });
    }
}
