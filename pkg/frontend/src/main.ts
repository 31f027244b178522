import { StudioApp } from './ui.js';

const root = document.getElementById('app');
if (!root) {
    throw new Error('missing #app container');
}
// When served from the colorization service at /studio, the API lives at
// the same origin; the header input can point elsewhere.
const app = new StudioApp(root, '');
void app.init();
