import init, { fragilityCurves, scenarioMap, recoveryCurves } from './pkg/quake_recovery_web.js';

const COLORS = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e'];
const $ = (id) => document.getElementById(id);

function event() {
  return [Number($('seed').value) >>> 0, Number($('mag').value), Number($('ex').value), Number($('ey').value)];
}

function showError(e) {
  $('error').textContent = e ? String(e.message || e) : '';
}

// Axes with a margin; returns a mapper from data to pixels.
function axes(ctx, xmax, ymax, xlabel, ylabel) {
  const { width: w, height: h } = ctx.canvas;
  const m = { l: 70, r: 15, t: 10, b: 35 };
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = '#888';
  ctx.fillStyle = '#444';
  ctx.font = '12px sans-serif';
  ctx.beginPath();
  ctx.moveTo(m.l, m.t);
  ctx.lineTo(m.l, h - m.b);
  ctx.lineTo(w - m.r, h - m.b);
  ctx.stroke();
  for (let i = 0; i <= 4; i++) {
    const y = h - m.b - (i / 4) * (h - m.t - m.b);
    ctx.fillText(((ymax * i) / 4).toPrecision(3), 5, y + 4);
    const x = m.l + (i / 4) * (w - m.l - m.r);
    ctx.fillText(((xmax * i) / 4).toPrecision(3), x - 10, h - m.b + 15);
  }
  ctx.fillText(xlabel, w / 2, h - 5);
  ctx.fillText(ylabel, m.l + 5, m.t + 12);
  return (x, y) => [m.l + (x / xmax) * (w - m.l - m.r), h - m.b - (y / ymax) * (h - m.t - m.b)];
}

function legend(el, names) {
  el.innerHTML = names.map((n, i) => `<span style="color:${COLORS[i % COLORS.length]}">━ ${n}</span>`).join('');
}

function drawFragility() {
  const kind = $('kind').value;
  const data = JSON.parse(fragilityCurves(kind, 2.0, 200));
  const ctx = $('fragility').getContext('2d');
  const map = axes(ctx, 2.0, 1.0, 'PGA (g)', 'P(exceed)');
  data.exceedance.forEach(([state, ys], i) => {
    ctx.strokeStyle = COLORS[i];
    ctx.beginPath();
    ys.forEach((y, k) => {
      const [px, py] = map(data.pga[k], y);
      k ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
    });
    ctx.stroke();
  });
  legend($('fragility-legend'), data.exceedance.map(([s]) => s));
}

function stateColor(state) {
  if (state === 'None') return '#2a7';
  if (state === 'Minor' || state === 'Moderate') return '#e90';
  return '#d22';
}

function drawMap() {
  const data = JSON.parse(scenarioMap(...event()));
  const ctx = $('map').getContext('2d');
  const { width: w, height: h } = ctx.canvas;
  ctx.clearRect(0, 0, w, h);
  const xs = data.nodes.map((n) => n.site[0]);
  const ys = data.nodes.map((n) => n.site[1]);
  const [x0, x1, y0, y1] = [Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys)];
  const s = Math.min((w - 60) / (x1 - x0), (h - 60) / (y1 - y0));
  const px = ([x, y]) => [30 + (x - x0) * s, h - 30 - (y - y0) * s];
  const site = Object.fromEntries(data.nodes.map((n) => [n.id, n.site]));

  ctx.lineWidth = 3;
  for (const c of data.components.filter((c) => c.nodes)) {
    ctx.strokeStyle = stateColor(c.state);
    ctx.beginPath();
    ctx.moveTo(...px(site[c.nodes[0]]));
    ctx.lineTo(...px(site[c.nodes[1]]));
    ctx.stroke();
  }
  ctx.lineWidth = 1;
  ctx.fillStyle = '#bbb';
  for (const n of data.nodes) {
    const [x, y] = px(n.site);
    ctx.beginPath();
    ctx.arc(x, y, 2 + Math.sqrt(n.population) / 8, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.font = '11px sans-serif';
  for (const c of data.components.filter((c) => !c.nodes)) {
    const [x, y] = px(c.site);
    ctx.fillStyle = stateColor(c.state);
    ctx.beginPath();
    if (c.kind === 'Well') {
      ctx.moveTo(x, y - 9); ctx.lineTo(x + 8, y + 6); ctx.lineTo(x - 8, y + 6);
    } else if (c.kind === 'BoosterPump') {
      ctx.rect(x - 7, y - 7, 14, 14);
    } else {
      ctx.moveTo(x, y - 9); ctx.lineTo(x + 9, y); ctx.lineTo(x, y + 9); ctx.lineTo(x - 9, y);
    }
    ctx.fill();
    ctx.fillStyle = '#222';
    ctx.fillText(c.id, x + 10, y - 6);
  }
  $('scenario-info').textContent =
    `${data.num_damaged} damaged components; ${data.served_population} of ${data.total_population} people served`;
}

function drawCurves() {
  const planners = [...document.querySelectorAll('.planner:checked')].map((c) => c.value);
  if (!planners.length) return;
  $('status').textContent = 'running…';
  // Let the status paint before the blocking call.
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const data = JSON.parse(recoveryCurves(...event(), Number($('crews').value), planners.join(',')));
      const ctx = $('curves').getContext('2d');
      const map = axes(ctx, data.horizon_days, data.total_population, 'days', 'people served');
      data.series.forEach((s, i) => {
        ctx.strokeStyle = COLORS[i % COLORS.length];
        ctx.lineWidth = 2;
        ctx.beginPath();
        s.points.forEach(([t, v], k) => {
          const [x, y] = map(t, v);
          if (k) {
            const [, yPrev] = map(t, s.points[k - 1][1]);
            ctx.lineTo(x, yPrev);
            ctx.lineTo(x, y);
          } else {
            ctx.moveTo(x, y);
          }
        });
        ctx.lineTo(...map(data.horizon_days, s.points[s.points.length - 1][1]));
        ctx.stroke();
      });
      legend($('curves-legend'), data.series.map((s) =>
        `${s.planner}: ${(s.auc / 1e6).toFixed(3)}M person-days, ${s.simq_calls} simulations`));
      $('status').textContent = `${((performance.now() - t0) / 1000).toFixed(2)} s`;
      showError(null);
    } catch (e) {
      $('status').textContent = '';
      showError(e);
    }
  }, 10);
}

function guarded(f) {
  return () => {
    try {
      f();
      showError(null);
    } catch (e) {
      showError(e);
    }
  };
}

await init();
$('kind').addEventListener('change', guarded(drawFragility));
$('sample').addEventListener('click', guarded(drawMap));
$('run').addEventListener('click', drawCurves);
guarded(drawFragility)();
guarded(drawMap)();
