import math

from django import forms

from .optimizer import METHODS, OptimConfig


def _finite_number(value, label):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise forms.ValidationError(f'{label} must be a finite number.')
    return float(value)


class DomainForm(forms.Form):
    """Annular domain plus the admissibility limits its shapes are checked against"""

    a = forms.FloatField(label='Inner radius')
    fourier = forms.JSONField(label='Fourier coefficients [[c0, 0], [cos1, sin1], ...]')
    R_U = forms.FloatField(label='Hold-all radius')
    delta_gap = forms.FloatField(required=False, min_value=0.0)
    max_fourier_norm = forms.FloatField(required=False, min_value=0.0)
    max_perimeter = forms.FloatField(required=False, min_value=0.0)

    def clean_a(self):
        a = self.cleaned_data['a']
        if a <= 0:
            raise forms.ValidationError('Inner radius must be positive.')
        return a

    def clean_fourier(self):
        """Validate the coefficient list shape: non-empty list of [cos, sin] pairs"""
        fourier = self.cleaned_data.get('fourier')
        if not isinstance(fourier, list) or not fourier:
            raise forms.ValidationError('Fourier coefficients must be a non-empty list of pairs.')
        pairs = []
        for k, pair in enumerate(fourier):
            if not isinstance(pair, list) or len(pair) != 2:
                raise forms.ValidationError(f'Harmonic {k} must be a [cos, sin] pair.')
            pairs.append((_finite_number(pair[0], f'cos{k}'), _finite_number(pair[1], f'sin{k}')))
        return pairs

    def clean(self):
        cleaned_data = super().clean()
        a, R_U, fourier = cleaned_data.get('a'), cleaned_data.get('R_U'), cleaned_data.get('fourier')
        if a is not None and R_U is not None and R_U <= a:
            raise forms.ValidationError('Hold-all radius must exceed the inner radius.')
        if a is not None and fourier and fourier[0][0] <= a:
            raise forms.ValidationError('Mean outer radius c0 must exceed the inner radius.')
        for name in ('delta_gap', 'max_fourier_norm', 'max_perimeter'):
            if cleaned_data.get(name) == 0.0:
                self.add_error(name, 'Must be strictly positive.')
        return cleaned_data


class PhysicsForm(forms.Form):
    FLUX_SIGN_CHOICES = [(1, '+1'), (-1, '-1')]

    lam = forms.FloatField(label='lambda')
    beta = forms.FloatField()
    flux_sign = forms.TypedChoiceField(choices=FLUX_SIGN_CHOICES, coerce=int, required=False,
                                       empty_value=-1)

    def clean_lam(self):
        lam = self.cleaned_data['lam']
        if lam <= 0:
            raise forms.ValidationError('lambda must be positive.')
        return lam

    def clean_beta(self):
        beta = self.cleaned_data['beta']
        if beta <= 0:
            raise forms.ValidationError('beta must be positive.')
        return beta


class MeshForm(forms.Form):
    n_r = forms.IntegerField(required=False, min_value=1)
    n_theta = forms.IntegerField(required=False, min_value=4)


class SolverForm(forms.Form):
    tol = forms.FloatField(required=False)
    max_iters = forms.IntegerField(required=False, min_value=1)

    def clean_tol(self):
        tol = self.cleaned_data.get('tol')
        if tol is not None and not 0 < tol < 1:
            raise forms.ValidationError('Solver tolerance must lie in (0, 1).')
        return tol


class OptimizerForm(forms.Form):
    method = forms.ChoiceField(choices=[(m, m) for m in METHODS], required=False)
    initial_step = forms.FloatField(required=False)
    shrink = forms.FloatField(required=False)
    armijo = forms.FloatField(required=False)
    min_step = forms.FloatField(required=False)
    j_tol = forms.FloatField(required=False)
    grad_tol = forms.FloatField(required=False)
    max_iters = forms.IntegerField(required=False)
    n_r = forms.IntegerField(required=False, min_value=1)
    n_theta = forms.IntegerField(required=False, min_value=4)
    fd_step = forms.FloatField(required=False)
    solver_tol = forms.FloatField(required=False)
    workers = forms.IntegerField(required=False)

    def clean(self):
        """Let OptimConfig check the combined values"""
        cleaned_data = super().clean()
        given = {k: v for k, v in cleaned_data.items() if v not in (None, '')}
        try:
            cleaned_data['config'] = OptimConfig(**given)
        except ValueError as exc:
            raise forms.ValidationError(str(exc))
        return cleaned_data


class AuditForm(forms.Form):
    s_max = forms.FloatField(required=False)
    s_points = forms.IntegerField(required=False, min_value=2)
    samples = forms.IntegerField(required=False, min_value=3)
    seed = forms.IntegerField(required=False, min_value=0)

    def clean_s_max(self):
        s_max = self.cleaned_data.get('s_max')
        if s_max is not None and s_max <= 1:
            raise forms.ValidationError('s_max must exceed 1.')
        return s_max


class SurveyForm(forms.Form):
    FAMILY_CHOICES = [('random', 'Random harmonics'), ('concentric', 'Concentric annuli')]

    family = forms.ChoiceField(choices=FAMILY_CHOICES, required=False)
    count = forms.IntegerField(required=False, min_value=1)
    max_harmonic = forms.IntegerField(required=False, min_value=1)
    amplitude = forms.FloatField(required=False, min_value=0.0)
    seed = forms.IntegerField(required=False, min_value=0)
    radii = forms.JSONField(required=False)
    workers = forms.IntegerField(required=False, min_value=1)

    def clean_radii(self):
        radii = self.cleaned_data.get('radii')
        if radii is None:
            return None
        if not isinstance(radii, list) or not radii:
            raise forms.ValidationError('radii must be a non-empty list of numbers.')
        return [_finite_number(r, 'radius') for r in radii]


class ConvergenceForm(forms.Form):
    a = forms.FloatField(required=False)
    R = forms.FloatField(required=False)
    levels = forms.JSONField(required=False)
    radial_divisor = forms.IntegerField(required=False, min_value=1)

    def clean_levels(self):
        levels = self.cleaned_data.get('levels')
        if levels is None:
            return None
        if (not isinstance(levels, list) or len(levels) < 2
                or not all(isinstance(n, int) and not isinstance(n, bool) and n >= 4 for n in levels)):
            raise forms.ValidationError('levels must list at least two integers >= 4.')
        return sorted(levels)

    def clean(self):
        cleaned_data = super().clean()
        a, R = cleaned_data.get('a'), cleaned_data.get('R')
        if a is not None and a <= 0:
            self.add_error('a', 'Inner radius must be positive.')
        elif a is not None and R is not None and R <= a:
            self.add_error('R', 'Outer radius must exceed the inner radius.')
        return cleaned_data


SECTION_FORMS = {
    'domain': DomainForm,
    'physics': PhysicsForm,
    'mesh': MeshForm,
    'solver': SolverForm,
    'optimizer': OptimizerForm,
    'audit': AuditForm,
    'survey': SurveyForm,
    'convergence': ConvergenceForm,
}

# config keys that are not valid Python identifiers for form fields
FIELD_ALIASES = {'physics': {'lambda': 'lam'}}
